//! Dynamic action interpolation.
//!
//! At environment step `t` the executed action is the convex combination
//! `(1 - α(t))·a_E(s) + α(t)·a_RL(s)` of the expert's action and the
//! learner's noiseless action, with `α` a non-decreasing schedule that starts
//! at 0 and saturates (or tends) to 1 after `t_change` steps. Exploration
//! noise, when enabled, is added once to the mixed action.

use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::agents::{expert_action, ExpertPolicy, Td3Agent};
use crate::envs::EnvSpec;
use crate::error::{contract, Error, Result};
use crate::rng::Stream;

/// Rate of the exponential schedule: `α(t_change) = 1 - e^{-3} ≈ 0.95`.
pub const EXPONENTIAL_RATE: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleShape {
    Linear,
    Cosine,
    Exponential,
    Constant,
}

impl ScheduleShape {
    pub fn as_str(self) -> &'static str {
        match self {
            ScheduleShape::Linear => "linear",
            ScheduleShape::Cosine => "cosine",
            ScheduleShape::Exponential => "exponential",
            ScheduleShape::Constant => "constant",
        }
    }
}

impl fmt::Display for ScheduleShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScheduleShape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            ScheduleShape::Linear,
            ScheduleShape::Cosine,
            ScheduleShape::Exponential,
            ScheduleShape::Constant,
        ]
        .into_iter()
        .find(|shape| shape.as_str() == s)
        .ok_or_else(|| contract!("unknown schedule shape `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleSpec {
    pub shape: ScheduleShape,
    pub t_change: u64,
    /// Only read by [`ScheduleShape::Constant`].
    pub constant_value: f64,
}

impl ScheduleSpec {
    pub fn linear(t_change: u64) -> Self {
        ScheduleSpec {
            shape: ScheduleShape::Linear,
            t_change,
            constant_value: 1.0,
        }
    }

    pub fn constant(value: f64) -> Self {
        ScheduleSpec {
            shape: ScheduleShape::Constant,
            t_change: 1,
            constant_value: value,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.shape == ScheduleShape::Constant && !(0.0..=1.0).contains(&self.constant_value) {
            return Err(contract!("constant schedule value {} outside [0, 1]", self.constant_value));
        }
        Ok(())
    }

    /// `α(t)`; a zero `t_change` means the schedule has already finished.
    pub fn alpha(&self, t: u64) -> f64 {
        if self.shape == ScheduleShape::Constant {
            return self.constant_value;
        }
        if self.t_change == 0 {
            return 1.0;
        }
        let x = t as f64 / self.t_change as f64;
        match self.shape {
            ScheduleShape::Linear => x.clamp(0.0, 1.0),
            ScheduleShape::Cosine => (1.0 - libm::cos(PI * x.min(1.0))) / 2.0,
            ScheduleShape::Exponential => 1.0 - libm::exp(-EXPONENTIAL_RATE * x),
            ScheduleShape::Constant => unreachable!(),
        }
    }
}

pub fn alpha_of(schedule: &ScheduleSpec, t: u64) -> f64 {
    schedule.alpha(t)
}

/// `(1 - α)·a_E + α·a_RL`. The endpoints return the corresponding input
/// unchanged, so `α = 0` and `α = 1` are bit-exact.
pub fn interpolate(expert: &[f64], learner: &[f64], alpha: f64) -> Result<Vec<f64>> {
    if expert.len() != learner.len() {
        return Err(contract!(
            "interpolating actions of dimension {} and {}",
            expert.len(),
            learner.len()
        ));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(contract!("interpolation weight {alpha} outside [0, 1]"));
    }
    if alpha == 0.0 {
        return Ok(expert.to_vec());
    }
    if alpha == 1.0 {
        return Ok(learner.to_vec());
    }
    Ok(expert
        .iter()
        .zip(learner)
        .map(|(&e, &l)| ((1.0 - alpha) * e + alpha * l).clamp(e.min(l), e.max(l)))
        .collect())
}

/// Everything that went into one executed action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterpolationRecord {
    pub t: u64,
    pub alpha: f64,
    pub expert_action: Vec<f64>,
    pub rl_action: Vec<f64>,
    /// Pre-noise convex combination.
    pub mixed_action: Vec<f64>,
}

/// Where the learner's half of the mixture comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LearnerSource {
    /// Noiseless actor output.
    Actor,
    /// Uniform random action (warm-up); drawn from the exploration stream
    /// and never noised.
    Random,
}

/// Computes the action to execute at step `t`.
///
/// With no expert (plain TD3) the weight is pinned to 1. The expert is
/// also skipped whenever `α = 1`, so that path consumes exactly the same
/// randomness as plain TD3.
#[allow(clippy::too_many_arguments)]
pub fn dai_act(
    expert: Option<&ExpertPolicy>,
    agent: &Td3Agent,
    env: &EnvSpec,
    schedule: &ScheduleSpec,
    observation: &[f64],
    t: u64,
    rng: &mut Stream,
    explore: bool,
    learner: LearnerSource,
) -> Result<(Vec<f64>, InterpolationRecord)> {
    env.check_observation(observation)?;
    let alpha = match expert {
        Some(_) => schedule.alpha(t),
        None => 1.0,
    };
    let rl_action = match learner {
        LearnerSource::Actor => agent.actor_action(observation)?,
        LearnerSource::Random => agent.random_action(rng),
    };
    let expert_action = match expert {
        Some(e) if alpha < 1.0 => expert_action(e, env, observation)?,
        _ => rl_action.clone(),
    };
    let mixed_action = interpolate(&expert_action, &rl_action, alpha)?;
    let mut executed = mixed_action.clone();
    if explore && learner == LearnerSource::Actor {
        agent.add_exploration_noise(&mut executed, rng);
    }
    Ok((
        executed,
        InterpolationRecord {
            t,
            alpha,
            expert_action,
            rl_action,
            mixed_action,
        },
    ))
}
