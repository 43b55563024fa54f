use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use dai_core::agents::{bc_train, BcConfig, ExpertPolicy, Td3Agent};
use dai_core::envs::{EnvId, EnvSpec};
use dai_core::harness::{evaluate, rollouts, ExpertSource, MixedPolicy, Policy, Rollout};
use dai_core::numerics::{Activation, NetworkSpec};
use dai_core::rng::Stream;
use dai_lab::checkpoint::{load_trainer, resolve_expert, PolicyFile, MAGIC};
use dai_lab::config::{load_config, ConfigBuilder};
use dai_lab::demo::{collect_demonstrations, DemoSet};
use dai_lab::diag::{analyze, write_diagnostics};
use dai_lab::report::export_report;
use dai_lab::run::{output_root, resume_run, train_seeds, RunOptions};
use dai_lab::trajectory::{TrajectoryHeader, TrajectorySet};
use dai_lab::{LabError, Result};
use serde_json::json;

#[derive(Parser)]
#[command(name = "dai", version, about = "Expert-guided TD3 with dynamic action interpolation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Actor,
    Mixed,
}

#[derive(Subcommand)]
enum Command {
    /// Clone an expert from demonstrations, or evaluate an expert.
    Expert {
        #[arg(long)]
        env: EnvId,
        #[arg(long, conflicts_with = "evaluate", requires = "out")]
        demos: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        evaluate: bool,
        /// Expert to evaluate: `scripted` or `cloned:<path>`.
        #[arg(long, default_value = "scripted")]
        expert: ExpertSource,
        #[arg(long, default_value_t = 100)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = BcConfig::default().epochs)]
        epochs: usize,
        #[arg(long, default_value_t = BcConfig::default().batch_size)]
        batch_size: usize,
        #[arg(long, default_value_t = BcConfig::default().learning_rate)]
        learning_rate: f64,
        #[arg(long, default_value = "64,64", value_delimiter = ',')]
        hidden: Vec<usize>,
    },
    /// Roll out an expert and write a demonstration file.
    Collect {
        #[arg(long)]
        env: EnvId,
        #[arg(long, default_value = "scripted")]
        expert: ExpertSource,
        #[arg(long, default_value_t = 20)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one run per seed.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        /// `key=value` override, applied after the file; repeatable.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        #[arg(long, conflicts_with = "seeds")]
        seed: Option<u64>,
        #[arg(long, value_delimiter = ',')]
        seeds: Vec<u64>,
        /// Parent directory of the per-seed run directories.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long)]
        checkpoint_every: Option<u64>,
        /// Continue a checkpoint; `--out` is then the new run directory.
        #[arg(long, conflicts_with_all = ["config", "overrides", "seed", "seeds"])]
        resume: Option<PathBuf>,
    },
    /// Evaluate a checkpoint or policy file.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 10)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "actor")]
        mode: Mode,
        /// Mixing weight for `--mode mixed`; defaults to the schedule's
        /// value at the checkpoint step.
        #[arg(long)]
        alpha: Option<f64>,
        /// Also record the evaluation episodes as a trajectory file.
        #[arg(long)]
        record: Option<PathBuf>,
        #[arg(long, default_value_t = 0.99)]
        gamma: f64,
    },
    /// Visitation diagnostics over trajectory files.
    Diag {
        #[arg(long, num_args = 1.., required = true)]
        trajectories: Vec<PathBuf>,
        #[arg(long, default_value_t = 0.99)]
        gamma: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Aggregate a multi-seed experiment into tables and a plot.
    Report {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn print(value: serde_json::Value) {
    println!("{value}");
}

fn expert_cmd(cmd: Command) -> Result<()> {
    let Command::Expert {
        env,
        demos,
        out,
        evaluate: _,
        expert,
        episodes,
        seed,
        epochs,
        batch_size,
        learning_rate,
        hidden,
    } = cmd
    else {
        unreachable!()
    };
    let spec = EnvSpec::new(env);
    match (demos, out) {
        (Some(demos), Some(out)) => {
            let set = DemoSet::load(&demos)?;
            if set.header.env_id != env {
                return Err(LabError::Usage(format!(
                    "{}: demonstrations are for {}, not {env}",
                    demos.display(),
                    set.header.env_id
                )));
            }
            let config = BcConfig {
                hidden: hidden.clone(),
                epochs,
                batch_size,
                learning_rate,
            };
            let net = NetworkSpec::mlp(spec.obs_dim, &hidden, spec.action_dim, Activation::Tanh);
            let mut rng = Stream::new(seed, "bc");
            let (cloned, report) = bc_train(&set.pairs, &spec, net, &config, &mut rng)?;
            PolicyFile::from_bc(env, &cloned, &report)?.save(&out)?;
            let stats = evaluate(&cloned, &spec, episodes, seed)?;
            print(json!({"out": out, "pairs": set.pairs.len(), "final_mse": report.final_mse,
                "updates": report.updates, "eval_mean": stats.mean, "eval_median": stats.median}));
        }
        _ => {
            let policy = resolve_expert(&expert, env)?;
            let stats = evaluate(&policy, &spec, episodes, seed)?;
            print(json!({"expert": expert.to_string(), "episodes": episodes, "mean": stats.mean,
                "median": stats.median, "std": stats.std, "min": stats.min, "max": stats.max,
                "ci_lo": stats.median_ci.0, "ci_hi": stats.median_ci.1}));
        }
    }
    Ok(())
}

fn train_cmd(cmd: Command) -> Result<()> {
    let Command::Train {
        config,
        overrides,
        seed,
        seeds,
        out,
        jobs,
        checkpoint_every,
        resume,
    } = cmd
    else {
        unreachable!()
    };
    let options = RunOptions {
        checkpoint_every,
        stop_at: None,
    };
    if let Some(ckpt) = resume {
        let out = out.ok_or_else(|| LabError::Usage("--resume needs --out for the new run directory".into()))?;
        let trainer = load_trainer(&ckpt)?;
        let (_, summary) = resume_run(trainer, &out, &options)?;
        print(json!({"resumed_from": ckpt, "out": out, "summary": summary}));
        return Ok(());
    }
    let base = match &config {
        Some(path) => load_config(path, &overrides)?,
        None => {
            let mut b = ConfigBuilder::new();
            b.apply_overrides(&overrides);
            b.build()?
        }
    };
    let seeds = match (seed, seeds.is_empty()) {
        (Some(s), _) => vec![s],
        (None, false) => seeds,
        (None, true) => vec![base.seed],
    };
    let out = out.unwrap_or_else(|| output_root(&base.output_dir).join(base.algorithm.as_str()));
    let summaries = train_seeds(&base, &seeds, &out, jobs, &options)?;
    print(json!({"out": out, "runs": summaries}));
    Ok(())
}

fn write_recording(path: &Path, env: EnvId, policy: String, alpha: Option<f64>, seed: u64, gamma: f64, runs: &[Rollout]) -> Result<()> {
    let header = TrajectoryHeader {
        env_id: env,
        policy,
        schedule: None,
        alpha,
        seed,
        gamma,
        rows: 0,
    };
    TrajectorySet::from_rollouts(header, runs).save(path)
}

fn eval_cmd(cmd: Command) -> Result<()> {
    let Command::Eval {
        checkpoint,
        episodes,
        seed,
        mode,
        alpha,
        record,
        gamma,
    } = cmd
    else {
        unreachable!()
    };
    let bytes = std::fs::read(&checkpoint).map_err(|e| LabError::io(&checkpoint, e))?;
    if !bytes.starts_with(MAGIC) {
        return Err(LabError::Incompatible {
            path: checkpoint,
            reason: "not a checkpoint or policy file".into(),
        });
    }
    let (env, expert, agent, step, schedule): (EnvSpec, Option<ExpertPolicy>, Option<Td3Agent>, u64, _) =
        match PolicyFile::decode(&bytes, &checkpoint) {
            Ok(p) => (EnvSpec::new(p.env_id), Some(p.into_expert()), None, 0, None),
            Err(LabError::Incompatible { .. }) => {
                let t = dai_lab::checkpoint::decode_trainer(&bytes, &checkpoint)?;
                (t.env, t.expert, Some(t.agent), t.t, Some(t.config.schedule))
            }
            Err(e) => return Err(e),
        };
    let (policy, label, used_alpha): (Box<dyn Policy + '_>, String, Option<f64>) = match (mode, &agent, &expert) {
        (Mode::Actor, Some(agent), _) => (Box::new(agent.clone()), format!("actor@{step}"), None),
        (Mode::Actor, None, Some(e)) => (Box::new(e.clone()), "policy".into(), None),
        (Mode::Mixed, Some(agent), Some(e)) => {
            let a = alpha
                .or_else(|| schedule.map(|s| s.alpha(step)))
                .expect("trainer checkpoints carry a schedule");
            if !(0.0..=1.0).contains(&a) {
                return Err(LabError::Usage(format!("--alpha {a} outside [0, 1]")));
            }
            (
                Box::new(MixedPolicy {
                    expert: e,
                    agent,
                    alpha: a,
                }),
                format!("mixed:{}@{step}", e.kind()),
                Some(a),
            )
        }
        _ => {
            return Err(LabError::Usage(
                "--mode mixed needs a training checkpoint with an expert".into(),
            ))
        }
    };
    let runs = rollouts(policy.as_ref(), &env, episodes, seed)?;
    let stats = evaluate(policy.as_ref(), &env, episodes, seed)?;
    if let Some(path) = &record {
        write_recording(path, env.env_id, label.clone(), used_alpha, seed, gamma, &runs)?;
    }
    print(json!({"policy": label, "alpha": used_alpha, "episodes": episodes, "mean": stats.mean,
        "median": stats.median, "std": stats.std, "min": stats.min, "max": stats.max,
        "ci_lo": stats.median_ci.0, "ci_hi": stats.median_ci.1}));
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        cmd @ Command::Expert { .. } => expert_cmd(cmd),
        Command::Collect {
            env,
            expert,
            episodes,
            seed,
            out,
        } => {
            let policy = resolve_expert(&expert, env)?;
            let summary = collect_demonstrations(&policy, env, episodes, seed, &out)?;
            print(json!({"out": out, "pairs": summary.pairs, "mean_return": summary.mean_return}));
            Ok(())
        }
        cmd @ Command::Train { .. } => train_cmd(cmd),
        cmd @ Command::Eval { .. } => eval_cmd(cmd),
        Command::Diag {
            trajectories,
            gamma,
            out,
        } => {
            let sets = trajectories
                .iter()
                .map(|p| Ok((p.display().to_string(), TrajectorySet::load(p)?)))
                .collect::<Result<Vec<_>>>()?;
            let diags = analyze(&sets, gamma)?;
            write_diagnostics(&diags, &out)?;
            print(json!({"out": out, "sets": diags.len()}));
            Ok(())
        }
        Command::Report { manifest, out } => {
            let out = out.unwrap_or_else(|| output_root("runs").join("report"));
            let report = export_report(&manifest, &out)?;
            print(json!({"out": out, "arms": report.curves.len(), "early_step": report.early_step}));
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", json!({"error": e.kind(), "message": e.to_string()}));
            ExitCode::FAILURE
        }
    }
}
