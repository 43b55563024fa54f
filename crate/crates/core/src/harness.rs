//! The training loop, rollouts and evaluation.
//!
//! One call to [`Trainer::step`] is one iteration of the interpolated
//! actor-critic loop: pick `α_t`, build the executed action, step the
//! environment, store the transition, update the learner, and reset on
//! episode end. Evaluation uses a separate seed stream so it never perturbs
//! training.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::agents::{expert_action, ExpertPolicy, Td3Agent, Td3Config};
use crate::dai::{dai_act, interpolate, InterpolationRecord, LearnerSource, ScheduleSpec};
use crate::envs::{project, EnvId, EnvSpec, EnvState};
use crate::error::{contract, Error, Result};
use crate::replay::{ReplayBuffer, Transition, DEFAULT_CAPACITY};
use crate::rng::{derive_seed, labels, Stream};
use crate::stats::ReturnStats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Td3,
    Td3Dai,
}

impl Algorithm {
    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Td3 => "td3",
            Algorithm::Td3Dai => "td3_dai",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "td3" => Ok(Algorithm::Td3),
            "td3_dai" => Ok(Algorithm::Td3Dai),
            _ => Err(contract!("unknown algorithm `{s}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpertSource {
    Scripted,
    /// Path to a checkpoint or demo-trained policy file, resolved by the caller.
    Cloned(String),
}

impl fmt::Display for ExpertSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExpertSource::Scripted => f.write_str("scripted"),
            ExpertSource::Cloned(path) => write!(f, "cloned:{path}"),
        }
    }
}

impl FromStr for ExpertSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.split_once(':') {
            None if s == "scripted" => Ok(ExpertSource::Scripted),
            Some(("cloned", path)) if !path.is_empty() => Ok(ExpertSource::Cloned(path.into())),
            _ => Err(contract!("expert source must be `scripted` or `cloned:<path>`, got `{s}`")),
        }
    }
}

/// Which controller the periodic evaluation measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalMode {
    /// The learner's noiseless actor.
    Actor,
    /// The interpolated controller at the current `α`.
    Mixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub env_id: EnvId,
    pub algorithm: Algorithm,
    pub total_steps: u64,
    pub schedule: ScheduleSpec,
    pub expert_source: ExpertSource,
    pub td3: Td3Config,
    pub seed: u64,
    pub eval_every: u64,
    pub eval_episodes: usize,
    pub eval_mode: EvalMode,
    /// Uniform-random learner actions up to `learning_starts`.
    /// `None` picks the per-algorithm default: on for TD3, off under DAI.
    pub random_warmup: Option<bool>,
    pub updates_per_step: u32,
    pub replay_capacity: usize,
    pub output_dir: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            env_id: EnvId::PendulumSwingup,
            algorithm: Algorithm::Td3Dai,
            total_steps: 40_000,
            schedule: ScheduleSpec::linear(20_000),
            expert_source: ExpertSource::Scripted,
            td3: Td3Config::default(),
            seed: 0,
            eval_every: 500,
            eval_episodes: 10,
            eval_mode: EvalMode::Actor,
            random_warmup: None,
            updates_per_step: 1,
            replay_capacity: DEFAULT_CAPACITY,
            output_dir: String::from("runs"),
        }
    }
}

impl RunConfig {
    pub fn random_warmup(&self) -> bool {
        self.random_warmup
            .unwrap_or(self.algorithm == Algorithm::Td3)
    }

    pub fn validate(&self) -> Result<()> {
        self.td3.validate()?;
        self.schedule.validate()?;
        if self.total_steps == 0 {
            return Err(contract!("total_steps must be positive"));
        }
        if self.total_steps < self.td3.learning_starts {
            return Err(contract!(
                "total_steps {} is below learning_starts {}",
                self.total_steps,
                self.td3.learning_starts
            ));
        }
        if self.eval_every == 0 || self.eval_episodes == 0 {
            return Err(contract!("eval_every and eval_episodes must be positive"));
        }
        if self.replay_capacity == 0 {
            return Err(contract!("replay_capacity must be positive"));
        }
        Ok(())
    }

    /// First seed of the evaluation episodes.
    pub fn eval_seed(&self) -> u64 {
        derive_seed(self.seed, labels::EVAL)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepLog {
    pub t: u64,
    pub alpha: f64,
    /// Undiscounted return of the episode that ended on this step.
    pub episode_return: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalLog {
    pub t: u64,
    pub stats: ReturnStats,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub steps: Vec<StepLog>,
    pub evals: Vec<EvalLog>,
    pub updates: u64,
    /// Filled in by whoever owns a clock; excluded from comparisons.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_clock_secs: Option<f64>,
}

impl RunMetrics {
    /// Equality of everything except wall-clock time.
    pub fn same_trajectory(&self, other: &RunMetrics) -> bool {
        self.steps == other.steps && self.evals == other.evals && self.updates == other.updates
    }

    pub fn eval_at(&self, t: u64) -> Option<&ReturnStats> {
        self.evals.iter().find(|e| e.t == t).map(|e| &e.stats)
    }

    /// First evaluation step whose mean return reaches `threshold`.
    pub fn first_eval_reaching(&self, threshold: f64) -> Option<u64> {
        self.evals
            .iter()
            .find(|e| e.stats.mean >= threshold)
            .map(|e| e.t)
    }
}

/// Anything that maps observations to actions.
pub trait Policy {
    fn act(&self, env: &EnvSpec, observation: &[f64]) -> Result<Vec<f64>>;
}

impl Policy for Td3Agent {
    fn act(&self, _env: &EnvSpec, observation: &[f64]) -> Result<Vec<f64>> {
        self.actor_action(observation)
    }
}

impl Policy for ExpertPolicy {
    fn act(&self, env: &EnvSpec, observation: &[f64]) -> Result<Vec<f64>> {
        expert_action(self, env, observation)
    }
}

/// Fixed-weight interpolation of an expert and a learner.
#[derive(Debug, Clone, Copy)]
pub struct MixedPolicy<'a> {
    pub expert: &'a ExpertPolicy,
    pub agent: &'a Td3Agent,
    pub alpha: f64,
}

impl Policy for MixedPolicy<'_> {
    fn act(&self, env: &EnvSpec, observation: &[f64]) -> Result<Vec<f64>> {
        let learner = self.agent.actor_action(observation)?;
        if self.alpha == 1.0 {
            return Ok(learner);
        }
        let expert = expert_action(self.expert, env, observation)?;
        interpolate(&expert, &learner, self.alpha)
    }
}

/// Adapter for closures.
pub struct FnPolicy<F>(pub F);

impl<F> Policy for FnPolicy<F>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    fn act(&self, _env: &EnvSpec, observation: &[f64]) -> Result<Vec<f64>> {
        Ok((self.0)(observation))
    }
}

/// One noiseless episode.
#[derive(Debug, Clone, PartialEq)]
pub struct Rollout {
    pub env_id: EnvId,
    /// States the actions were taken in (`s_0 .. s_{T-1}`).
    pub observations: Vec<Vec<f64>>,
    pub actions: Vec<Vec<f64>>,
    pub rewards: Vec<f64>,
}

impl Rollout {
    pub fn total_return(&self) -> f64 {
        self.rewards.iter().sum()
    }

    pub fn projected(&self) -> Vec<[f64; 2]> {
        self.observations
            .iter()
            .map(|o| project(self.env_id, o))
            .collect()
    }
}

pub fn rollout<P: Policy + ?Sized>(policy: &P, env: &EnvSpec, seed: u64) -> Result<Rollout> {
    let (mut state, mut obs) = EnvState::reset(env, seed);
    let horizon = env.max_episode_steps as usize;
    let mut out = Rollout {
        env_id: env.env_id,
        observations: Vec::with_capacity(horizon),
        actions: Vec::with_capacity(horizon),
        rewards: Vec::with_capacity(horizon),
    };
    loop {
        let mut action = policy.act(env, &obs)?;
        env.check_action(&action)?;
        env.clip_action(&mut action);
        let step = state.step(env, &action)?;
        out.observations.push(core::mem::replace(&mut obs, step.observation));
        out.actions.push(action);
        out.rewards.push(step.reward);
        if step.done {
            return Ok(out);
        }
    }
}

/// Rollouts with seeds `seed, seed + 1, ..`.
pub fn rollouts<P: Policy + ?Sized>(policy: &P, env: &EnvSpec, episodes: usize, seed: u64) -> Result<Vec<Rollout>> {
    (0..episodes as u64)
        .map(|i| rollout(policy, env, seed.wrapping_add(i)))
        .collect()
}

/// Noiseless evaluation over `episodes` seeded episodes.
pub fn evaluate<P: Policy + ?Sized>(policy: &P, env: &EnvSpec, episodes: usize, seed: u64) -> Result<ReturnStats> {
    if episodes == 0 {
        return Err(contract!("evaluation needs at least one episode"));
    }
    let returns: Vec<f64> = rollouts(policy, env, episodes, seed)?
        .iter()
        .map(Rollout::total_return)
        .collect();
    ReturnStats::from_returns(&returns, seed)
}

/// What happened on one training step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub t: u64,
    pub record: InterpolationRecord,
    pub transition: Transition,
    pub updated: bool,
    pub episode_return: Option<f64>,
    pub eval: Option<ReturnStats>,
}

/// Complete state of a training run; every field is needed to resume
/// bit-exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trainer {
    pub config: RunConfig,
    pub env: EnvSpec,
    pub expert: Option<ExpertPolicy>,
    pub agent: Td3Agent,
    pub replay: ReplayBuffer,
    pub env_state: EnvState,
    pub observation: Vec<f64>,
    /// Environment steps completed so far.
    pub t: u64,
    pub episode_return: f64,
    pub env_rng: Stream,
    pub explore_rng: Stream,
    pub update_rng: Stream,
    pub metrics: RunMetrics,
}

impl Trainer {
    /// `expert` must be given exactly when the algorithm is TD3-DAI.
    pub fn new(config: RunConfig, expert: Option<ExpertPolicy>) -> Result<Self> {
        config.validate()?;
        let env = EnvSpec::new(config.env_id);
        match (config.algorithm, &expert) {
            (Algorithm::Td3Dai, None) => {
                return Err(contract!("td3_dai needs an expert policy"));
            }
            (Algorithm::Td3, Some(_)) => {
                return Err(contract!("plain td3 does not take an expert policy"));
            }
            (_, Some(e)) => e.validate_for(&env)?,
            _ => {}
        }
        let mut init_rng = Stream::new(config.seed, labels::INIT);
        let agent = Td3Agent::new(&env, config.td3.clone(), &mut init_rng)?;
        let replay = ReplayBuffer::new(config.replay_capacity, env.obs_dim, env.action_dim)?;
        let mut env_rng = Stream::new(config.seed, labels::ENV);
        let (env_state, observation) = EnvState::reset(&env, env_rng.next_u64());
        Ok(Trainer {
            explore_rng: Stream::new(config.seed, labels::EXPLORE),
            update_rng: Stream::new(config.seed, labels::UPDATE),
            config,
            env,
            expert,
            agent,
            replay,
            env_state,
            observation,
            t: 0,
            episode_return: 0.0,
            env_rng,
            metrics: RunMetrics::default(),
        })
    }

    pub fn is_finished(&self) -> bool {
        self.t >= self.config.total_steps
    }

    fn abort(&self, t: u64, cause: Error) -> Error {
        Error::NonFinite(format!(
            "training aborted at step {t}: {cause}; replay size {}, updates {}, update rng {:?}",
            self.replay.len(),
            self.agent.update_count,
            self.update_rng
        ))
    }

    fn current_alpha(&self, t: u64) -> f64 {
        match self.expert {
            Some(_) => self.config.schedule.alpha(t),
            None => 1.0,
        }
    }

    /// Evaluates the configured controller at step `t`.
    pub fn evaluate_now(&self, t: u64) -> Result<ReturnStats> {
        let episodes = self.config.eval_episodes;
        let seed = self.config.eval_seed();
        match (self.config.eval_mode, &self.expert) {
            (EvalMode::Mixed, Some(expert)) => {
                let mixed = MixedPolicy {
                    expert,
                    agent: &self.agent,
                    alpha: self.current_alpha(t),
                };
                evaluate(&mixed, &self.env, episodes, seed)
            }
            _ => evaluate(&self.agent, &self.env, episodes, seed),
        }
    }

    /// Runs one environment step (and the learner update that follows it).
    pub fn step(&mut self) -> Result<StepOutcome> {
        if self.is_finished() {
            return Err(contract!("run already completed {} steps", self.t));
        }
        let t = self.t + 1;
        let learning_starts = self.config.td3.learning_starts;
        let learner = if self.config.random_warmup() && t <= learning_starts {
            LearnerSource::Random
        } else {
            LearnerSource::Actor
        };
        let (mut action, record) = dai_act(
            self.expert.as_ref(),
            &self.agent,
            &self.env,
            &self.config.schedule,
            &self.observation,
            t,
            &mut self.explore_rng,
            true,
            learner,
        )?;
        self.env.clip_action(&mut action);

        let result = self.env_state.step(&self.env, &action)?;
        if !result.reward.is_finite() {
            return Err(self.abort(t, Error::NonFinite(format!("reward {}", result.reward))));
        }
        let transition = Transition {
            observation: core::mem::replace(&mut self.observation, result.observation.clone()),
            action,
            reward: result.reward,
            next_observation: result.observation,
            done: result.done,
            done_reason: result.done_reason,
        };
        self.replay.push(transition.clone())?;
        self.episode_return += result.reward;

        let mut updated = false;
        // Learning starts once warm-up is over and a full batch is stored.
        if t > learning_starts && self.replay.len() >= self.config.td3.batch_size {
            for _ in 0..self.config.updates_per_step {
                let batch = self.replay.sample(self.config.td3.batch_size, &mut self.update_rng)?;
                if let Err(e) = self.agent.update(&batch, &mut self.update_rng) {
                    return Err(self.abort(t, e));
                }
                self.metrics.updates += 1;
                updated = true;
            }
        }

        let episode_return = if result.done {
            let r = self.episode_return;
            let (state, obs) = EnvState::reset(&self.env, self.env_rng.next_u64());
            self.env_state = state;
            self.observation = obs;
            self.episode_return = 0.0;
            Some(r)
        } else {
            None
        };
        self.metrics.steps.push(StepLog {
            t,
            alpha: record.alpha,
            episode_return,
        });
        self.t = t;

        let eval = if t.is_multiple_of(self.config.eval_every) {
            let stats = self.evaluate_now(t)?;
            self.metrics.evals.push(EvalLog { t, stats });
            Some(stats)
        } else {
            None
        };
        Ok(StepOutcome {
            t,
            record,
            transition,
            updated,
            episode_return,
            eval,
        })
    }

    /// Steps until `t` reaches `until` (capped at the configured total).
    pub fn run_until(&mut self, until: u64) -> Result<()> {
        let until = until.min(self.config.total_steps);
        while self.t < until {
            self.step()?;
        }
        Ok(())
    }

    pub fn run(&mut self) -> Result<&RunMetrics> {
        self.run_until(self.config.total_steps)?;
        Ok(&self.metrics)
    }
}

/// Builds and runs a trainer to completion.
pub fn run_training(config: RunConfig, expert: Option<ExpertPolicy>) -> Result<Trainer> {
    let mut trainer = Trainer::new(config, expert)?;
    trainer.run()?;
    Ok(trainer)
}
