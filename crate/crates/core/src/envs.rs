//! Deterministic continuous-control tasks with analytic expert controllers.
//!
//! Both tasks run for a fixed horizon with no early termination. Actions are
//! clipped to the box bounds before integration, and all randomness comes from
//! the seed handed to [`EnvState::reset`].

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{contract, ensure_dim, Error, Result};
use crate::rng::Stream;

pub const MAX_EPISODE_STEPS: u32 = 200;

pub const PENDULUM_DT: f64 = 0.05;
pub const PENDULUM_G: f64 = 10.0;
pub const PENDULUM_M: f64 = 1.0;
pub const PENDULUM_L: f64 = 1.0;
pub const PENDULUM_MAX_TORQUE: f64 = 2.0;
pub const PENDULUM_MAX_SPEED: f64 = 8.0;

pub const POINT_DT: f64 = 0.1;
pub const POINT_MAX_FORCE: f64 = 1.0;
pub const POINT_DAMPING: f64 = 0.95;
pub const POINT_BOUND: f64 = 5.0;
/// Terminal speed under the largest force: `dt·F / (1 - damping)`.
pub const POINT_MAX_SPEED: f64 = POINT_DT * POINT_MAX_FORCE / (1.0 - POINT_DAMPING);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvId {
    PendulumSwingup,
    PointMass2d,
}

impl EnvId {
    pub const ALL: [EnvId; 2] = [EnvId::PendulumSwingup, EnvId::PointMass2d];

    pub fn as_str(self) -> &'static str {
        match self {
            EnvId::PendulumSwingup => "pendulum_swingup",
            EnvId::PointMass2d => "point_mass_2d",
        }
    }
}

impl fmt::Display for EnvId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EnvId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EnvId::ALL
            .into_iter()
            .find(|e| e.as_str() == s)
            .ok_or_else(|| contract!("unknown environment `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvSpec {
    pub env_id: EnvId,
    pub obs_dim: usize,
    pub action_dim: usize,
    pub action_low: Vec<f64>,
    pub action_high: Vec<f64>,
    pub max_episode_steps: u32,
    pub dt: f64,
}

impl EnvSpec {
    pub fn new(env_id: EnvId) -> Self {
        match env_id {
            EnvId::PendulumSwingup => EnvSpec {
                env_id,
                obs_dim: 3,
                action_dim: 1,
                action_low: vec![-PENDULUM_MAX_TORQUE],
                action_high: vec![PENDULUM_MAX_TORQUE],
                max_episode_steps: MAX_EPISODE_STEPS,
                dt: PENDULUM_DT,
            },
            EnvId::PointMass2d => EnvSpec {
                env_id,
                obs_dim: 4,
                action_dim: 2,
                action_low: vec![-POINT_MAX_FORCE; 2],
                action_high: vec![POINT_MAX_FORCE; 2],
                max_episode_steps: MAX_EPISODE_STEPS,
                dt: POINT_DT,
            },
        }
    }

    pub fn clip_action(&self, action: &mut [f64]) {
        for ((a, &lo), &hi) in action.iter_mut().zip(&self.action_low).zip(&self.action_high) {
            *a = a.clamp(lo, hi);
        }
    }

    pub fn action_in_bounds(&self, action: &[f64]) -> bool {
        action.len() == self.action_dim
            && action
                .iter()
                .zip(&self.action_low)
                .zip(&self.action_high)
                .all(|((&a, &lo), &hi)| lo <= a && a <= hi)
    }

    /// Centre of the action box.
    pub fn action_midpoint(&self) -> Vec<f64> {
        self.action_low
            .iter()
            .zip(&self.action_high)
            .map(|(lo, hi)| 0.5 * (lo + hi))
            .collect()
    }

    /// Half-widths of the action box.
    pub fn action_half_range(&self) -> Vec<f64> {
        self.action_low
            .iter()
            .zip(&self.action_high)
            .map(|(lo, hi)| 0.5 * (hi - lo))
            .collect()
    }

    pub fn check_observation(&self, observation: &[f64]) -> Result<()> {
        ensure_dim("observation", self.obs_dim, observation.len())
    }

    pub fn check_action(&self, action: &[f64]) -> Result<()> {
        ensure_dim("action", self.action_dim, action.len())
    }
}

/// Wraps an angle into `(-π, π]`.
pub fn wrap_angle(theta: f64) -> f64 {
    let r = PI - libm::fmod(PI - theta, 2.0 * PI);
    // fmod keeps the dividend's sign; fold the negative branch back.
    if r > PI {
        r - 2.0 * PI
    } else {
        r
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Physics {
    Pendulum { theta: f64, theta_dot: f64 },
    PointMass {
        position: [f64; 2],
        velocity: [f64; 2],
        goal: [f64; 2],
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DoneReason {
    None,
    TimeLimit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub observation: Vec<f64>,
    pub reward: f64,
    pub done: bool,
    pub done_reason: DoneReason,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvState {
    pub env_id: EnvId,
    pub physics: Physics,
    pub step_count: u32,
    pub max_episode_steps: u32,
    pub rng: Stream,
}

impl EnvState {
    /// Draws an initial state from `seed`; identical seeds give bitwise
    /// identical states.
    pub fn reset(spec: &EnvSpec, seed: u64) -> (EnvState, Vec<f64>) {
        let mut rng = Stream::from_seed_u64(seed);
        let physics = match spec.env_id {
            EnvId::PendulumSwingup => Physics::Pendulum {
                theta: rng.uniform(-PI, PI),
                theta_dot: rng.uniform(-1.0, 1.0),
            },
            EnvId::PointMass2d => Physics::PointMass {
                position: [rng.uniform(-4.0, 4.0), rng.uniform(-4.0, 4.0)],
                velocity: [0.0; 2],
                goal: [0.0; 2],
            },
        };
        let state = EnvState {
            env_id: spec.env_id,
            physics,
            step_count: 0,
            max_episode_steps: spec.max_episode_steps,
            rng,
        };
        let obs = state.observation();
        (state, obs)
    }

    /// A state placed by hand, at step 0.
    pub fn with_physics(spec: &EnvSpec, physics: Physics) -> Result<Self> {
        let matches = matches!(
            (spec.env_id, &physics),
            (EnvId::PendulumSwingup, Physics::Pendulum { .. })
                | (EnvId::PointMass2d, Physics::PointMass { .. })
        );
        if !matches {
            return Err(contract!("physics does not belong to {}", spec.env_id));
        }
        Ok(EnvState {
            env_id: spec.env_id,
            physics,
            step_count: 0,
            max_episode_steps: spec.max_episode_steps,
            rng: Stream::from_seed_u64(0),
        })
    }

    pub fn observation(&self) -> Vec<f64> {
        match self.physics {
            Physics::Pendulum { theta, theta_dot } => {
                vec![libm::cos(theta), libm::sin(theta), theta_dot]
            }
            Physics::PointMass {
                position, velocity, ..
            } => vec![position[0], position[1], velocity[0], velocity[1]],
        }
    }

    pub fn is_done(&self) -> bool {
        self.step_count >= self.max_episode_steps
    }

    pub fn step(&mut self, spec: &EnvSpec, action: &[f64]) -> Result<StepResult> {
        if spec.env_id != self.env_id {
            return Err(contract!("state of {} stepped with spec of {}", self.env_id, spec.env_id));
        }
        spec.check_action(action)?;
        if self.is_done() {
            return Err(contract!("episode already finished after {} steps", self.step_count));
        }
        if let Some(i) = action.iter().position(|a| !a.is_finite()) {
            return Err(Error::NonFinite(alloc::format!("action[{i}] = {}", action[i])));
        }
        let mut u = action.to_vec();
        spec.clip_action(&mut u);

        let reward = match &mut self.physics {
            Physics::Pendulum { theta, theta_dot } => {
                let u = u[0];
                let accel = 3.0 * PENDULUM_G / (2.0 * PENDULUM_L) * libm::sin(*theta)
                    + 3.0 / (PENDULUM_M * PENDULUM_L * PENDULUM_L) * u;
                *theta_dot = (*theta_dot + PENDULUM_DT * accel).clamp(-PENDULUM_MAX_SPEED, PENDULUM_MAX_SPEED);
                *theta += PENDULUM_DT * *theta_dot;
                let w = wrap_angle(*theta);
                -(w * w + 0.1 * *theta_dot * *theta_dot + 0.001 * u * u)
            }
            Physics::PointMass {
                position,
                velocity,
                goal,
            } => {
                for k in 0..2 {
                    velocity[k] = (POINT_DAMPING * velocity[k] + POINT_DT * u[k])
                        .clamp(-POINT_MAX_SPEED, POINT_MAX_SPEED);
                    position[k] =
                        (position[k] + POINT_DT * velocity[k]).clamp(-POINT_BOUND, POINT_BOUND);
                }
                let dx = position[0] - goal[0];
                let dy = position[1] - goal[1];
                -libm::sqrt(dx * dx + dy * dy) - 0.01 * (u[0] * u[0] + u[1] * u[1])
            }
        };

        self.step_count += 1;
        let done = self.is_done();
        Ok(StepResult {
            observation: self.observation(),
            reward,
            done,
            done_reason: if done {
                DoneReason::TimeLimit
            } else {
                DoneReason::None
            },
        })
    }
}

/// The 2-D state projection used for visitation histograms and the
/// high-value indicator: pendulum → (wrapped angle, angular velocity);
/// point mass → (x, y).
pub fn project(env_id: EnvId, observation: &[f64]) -> [f64; 2] {
    match env_id {
        EnvId::PendulumSwingup => [libm::atan2(observation[1], observation[0]), observation[2]],
        EnvId::PointMass2d => [observation[0], observation[1]],
    }
}

fn sign(x: f64) -> f64 {
    if x >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// Analytic expert controller.
///
/// Pendulum: PD stabilisation near upright, otherwise bang-bang energy
/// pumping towards the upright energy level. The pendulum's angle is zero
/// at the top, so the energy proxy is `½θ̇² + (g/l)·cos θ` and equals
/// `g/l` upright at rest.
///
/// Point mass: proportional-derivative pull towards the origin.
pub fn scripted_expert_action(spec: &EnvSpec, observation: &[f64]) -> Result<Vec<f64>> {
    spec.check_observation(observation)?;
    let mut action = match spec.env_id {
        EnvId::PendulumSwingup => {
            let cos_theta = observation[0];
            let theta = libm::atan2(observation[1], observation[0]);
            let theta_dot = observation[2];
            let u = if cos_theta > 0.95 && libm::fabs(theta_dot) < 1.0 {
                -16.0 * theta - 2.0 * theta_dot
            } else {
                let g_over_l = PENDULUM_G / PENDULUM_L;
                let energy = 0.5 * theta_dot * theta_dot + g_over_l * cos_theta;
                let target = g_over_l;
                2.0 * sign(theta_dot) * sign(target - energy)
            };
            vec![u]
        }
        EnvId::PointMass2d => (0..2)
            .map(|k| -0.8 * observation[k] - 0.5 * observation[k + 2])
            .collect(),
    };
    spec.clip_action(&mut action);
    Ok(action)
}
