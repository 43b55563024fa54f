//! Run configuration files.
//!
//! A configuration is a flat list of `key = value` lines. Blank lines and
//! lines starting with `#` are ignored. Later assignments win, and command
//! line overrides are applied after the file. Unknown keys and unparsable
//! values are collected and reported together.
//!
//! | key | type | default |
//! |-----|------|---------|
//! | `env` | `pendulum_swingup` \| `point_mass_2d` | `pendulum_swingup` |
//! | `algorithm` | `td3` \| `td3_dai` | `td3_dai` |
//! | `total_steps` | integer | 40000 |
//! | `seed` | integer | 0 |
//! | `expert` | `scripted` \| `cloned:<path>` | `scripted` |
//! | `schedule.shape` | `linear` \| `cosine` \| `exponential` \| `constant` | `linear` |
//! | `schedule.t_change` | integer | half of `total_steps` |
//! | `schedule.constant_value` | real in [0, 1] | 1 |
//! | `eval_every` | integer | 500 |
//! | `eval_episodes` | integer | 10 |
//! | `eval_mode` | `actor` \| `mixed` | `actor` |
//! | `random_warmup` | `true` \| `false` \| `auto` | `auto` (on for td3 only) |
//! | `updates_per_step` | integer | 1 |
//! | `replay_capacity` | integer | 200000 |
//! | `output_dir` | path | `runs` |
//! | `td3.gamma` | real | 0.99 |
//! | `td3.tau` | real | 0.005 |
//! | `td3.policy_delay` | integer | 2 |
//! | `td3.exploration_noise_std` | real | 0.1 |
//! | `td3.target_noise_std` | real | 0.2 |
//! | `td3.target_noise_clip` | real | 0.5 |
//! | `td3.batch_size` | integer | 256 |
//! | `td3.learning_rate` | real | 0.0003 |
//! | `td3.learning_starts` | integer | 1000 |
//! | `td3.hidden` | comma-separated integers | `64,64` |

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use dai_core::harness::{EvalMode, RunConfig};

use crate::error::{LabError, Result};

pub const KEYS: &[&str] = &[
    "env",
    "algorithm",
    "total_steps",
    "seed",
    "expert",
    "schedule.shape",
    "schedule.t_change",
    "schedule.constant_value",
    "eval_every",
    "eval_episodes",
    "eval_mode",
    "random_warmup",
    "updates_per_step",
    "replay_capacity",
    "output_dir",
    "td3.gamma",
    "td3.tau",
    "td3.policy_delay",
    "td3.exploration_noise_std",
    "td3.target_noise_std",
    "td3.target_noise_clip",
    "td3.batch_size",
    "td3.learning_rate",
    "td3.learning_starts",
    "td3.hidden",
];

/// Splits `key = value`; `None` for blank and comment lines.
fn split_line(line: &str) -> Option<std::result::Result<(&str, &str), String>> {
    let line = line.trim();
    if line.is_empty() || line.starts_with('#') {
        return None;
    }
    Some(
        line.split_once('=')
            .map(|(k, v)| (k.trim(), v.trim()))
            .ok_or_else(|| format!("expected `key = value`, got `{line}`")),
    )
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> std::result::Result<T, String>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| format!("{key}: cannot parse `{value}`: {e}"))
}

fn parse_eval_mode(value: &str) -> std::result::Result<EvalMode, String> {
    match value {
        "actor" => Ok(EvalMode::Actor),
        "mixed" => Ok(EvalMode::Mixed),
        _ => Err(format!("eval_mode: expected `actor` or `mixed`, got `{value}`")),
    }
}

fn eval_mode_str(mode: EvalMode) -> &'static str {
    match mode {
        EvalMode::Actor => "actor",
        EvalMode::Mixed => "mixed",
    }
}

fn parse_hidden(value: &str) -> std::result::Result<Vec<usize>, String> {
    value
        .split(',')
        .map(|w| parse_value::<usize>("td3.hidden", w.trim()))
        .collect()
}

/// Accumulates assignments on top of the defaults.
#[derive(Debug, Clone, Default)]
pub struct ConfigBuilder {
    config: RunConfig,
    t_change_set: bool,
    errors: Vec<String>,
}

impl ConfigBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, key: &str, value: &str) {
        if let Err(e) = self.try_set(key, value) {
            self.errors.push(e);
        }
    }

    fn try_set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        let c = &mut self.config;
        match key {
            "env" => c.env_id = parse_value(key, value)?,
            "algorithm" => c.algorithm = parse_value(key, value)?,
            "total_steps" => c.total_steps = parse_value(key, value)?,
            "seed" => c.seed = parse_value(key, value)?,
            "expert" => c.expert_source = parse_value(key, value)?,
            "schedule.shape" => c.schedule.shape = parse_value(key, value)?,
            "schedule.t_change" => {
                c.schedule.t_change = parse_value(key, value)?;
                self.t_change_set = true;
            }
            "schedule.constant_value" => c.schedule.constant_value = parse_value(key, value)?,
            "eval_every" => c.eval_every = parse_value(key, value)?,
            "eval_episodes" => c.eval_episodes = parse_value(key, value)?,
            "eval_mode" => c.eval_mode = parse_eval_mode(value)?,
            "random_warmup" => {
                c.random_warmup = match value {
                    "auto" => None,
                    _ => Some(parse_value(key, value)?),
                }
            }
            "updates_per_step" => c.updates_per_step = parse_value(key, value)?,
            "replay_capacity" => c.replay_capacity = parse_value(key, value)?,
            "output_dir" => c.output_dir = value.to_string(),
            "td3.gamma" => c.td3.gamma = parse_value(key, value)?,
            "td3.tau" => c.td3.tau = parse_value(key, value)?,
            "td3.policy_delay" => c.td3.policy_delay = parse_value(key, value)?,
            "td3.exploration_noise_std" => c.td3.exploration_noise_std = parse_value(key, value)?,
            "td3.target_noise_std" => c.td3.target_noise_std = parse_value(key, value)?,
            "td3.target_noise_clip" => c.td3.target_noise_clip = parse_value(key, value)?,
            "td3.batch_size" => c.td3.batch_size = parse_value(key, value)?,
            "td3.learning_rate" => c.td3.learning_rate = parse_value(key, value)?,
            "td3.learning_starts" => c.td3.learning_starts = parse_value(key, value)?,
            "td3.hidden" => c.td3.hidden = parse_hidden(value)?,
            _ => return Err(format!("unknown key `{key}`")),
        }
        Ok(())
    }

    /// Applies every assignment line of a configuration document.
    pub fn apply_text(&mut self, text: &str, source: &str) {
        for (i, line) in text.lines().enumerate() {
            match split_line(line) {
                None => {}
                Some(Ok((k, v))) => {
                    let before = self.errors.len();
                    self.set(k, v);
                    if let Some(e) = self.errors.get_mut(before) {
                        *e = format!("{source}:{}: {e}", i + 1);
                    }
                }
                Some(Err(e)) => self.errors.push(format!("{source}:{}: {e}", i + 1)),
            }
        }
    }

    /// Applies `key=value` overrides in order.
    pub fn apply_overrides<S: AsRef<str>>(&mut self, overrides: &[S]) {
        for o in overrides {
            match split_line(o.as_ref()) {
                Some(Ok((k, v))) => self.set(k, v),
                _ => self.errors.push(format!("override: expected `key=value`, got `{}`", o.as_ref())),
            }
        }
    }

    /// Resolves defaults that depend on other keys and validates the result.
    pub fn build(mut self) -> Result<RunConfig> {
        if !self.t_change_set {
            self.config.schedule.t_change = self.config.total_steps / 2;
        }
        if self.errors.is_empty() {
            if let Err(e) = self.config.validate() {
                self.errors.push(e.to_string());
            }
        }
        if self.errors.is_empty() {
            Ok(self.config)
        } else {
            Err(LabError::Config(self.errors))
        }
    }
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut b = ConfigBuilder::new();
    b.apply_text(text, "config");
    b.build()
}

/// Reads a configuration file and applies overrides on top of it.
pub fn load_config<S: AsRef<str>>(path: &Path, overrides: &[S]) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| LabError::io(path, e))?;
    let mut b = ConfigBuilder::new();
    b.apply_text(&text, &path.display().to_string());
    b.apply_overrides(overrides);
    b.build()
}

/// Canonical text form listing every key; parsing it gives back `config`.
pub fn render_config(config: &RunConfig) -> String {
    let c = config;
    let hidden: Vec<String> = c.td3.hidden.iter().map(usize::to_string).collect();
    let warmup = match c.random_warmup {
        None => "auto".to_string(),
        Some(b) => b.to_string(),
    };
    let mut s = String::new();
    let mut kv = |k: &str, v: String| writeln!(s, "{k} = {v}").expect("string write");
    kv("env", c.env_id.to_string());
    kv("algorithm", c.algorithm.to_string());
    kv("total_steps", c.total_steps.to_string());
    kv("seed", c.seed.to_string());
    kv("expert", c.expert_source.to_string());
    kv("schedule.shape", c.schedule.shape.to_string());
    kv("schedule.t_change", c.schedule.t_change.to_string());
    kv("schedule.constant_value", c.schedule.constant_value.to_string());
    kv("eval_every", c.eval_every.to_string());
    kv("eval_episodes", c.eval_episodes.to_string());
    kv("eval_mode", eval_mode_str(c.eval_mode).to_string());
    kv("random_warmup", warmup);
    kv("updates_per_step", c.updates_per_step.to_string());
    kv("replay_capacity", c.replay_capacity.to_string());
    kv("output_dir", c.output_dir.clone());
    kv("td3.gamma", c.td3.gamma.to_string());
    kv("td3.tau", c.td3.tau.to_string());
    kv("td3.policy_delay", c.td3.policy_delay.to_string());
    kv("td3.exploration_noise_std", c.td3.exploration_noise_std.to_string());
    kv("td3.target_noise_std", c.td3.target_noise_std.to_string());
    kv("td3.target_noise_clip", c.td3.target_noise_clip.to_string());
    kv("td3.batch_size", c.td3.batch_size.to_string());
    kv("td3.learning_rate", c.td3.learning_rate.to_string());
    kv("td3.learning_starts", c.td3.learning_starts.to_string());
    kv("td3.hidden", hidden.join(","));
    s
}
