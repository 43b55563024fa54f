//! Learners and expert policies.

mod bc;
mod td3;

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

pub use bc::{bc_train, BcConfig, BcReport, DemoPair};
pub use td3::{scale_action, Td3Agent, Td3Config, Td3Losses};

use crate::envs::{scripted_expert_action, EnvSpec};
use crate::error::{contract, Result};
use crate::numerics::Network;

/// The guiding policy `a_E(s)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpertPolicy {
    Scripted,
    Cloned(Network),
}

impl ExpertPolicy {
    pub fn kind(&self) -> &'static str {
        match self {
            ExpertPolicy::Scripted => "scripted",
            ExpertPolicy::Cloned(_) => "cloned",
        }
    }

    /// Checks a cloned network against the environment's dimensions.
    pub fn validate_for(&self, env: &EnvSpec) -> Result<()> {
        if let ExpertPolicy::Cloned(net) = self {
            if net.input_dim() != env.obs_dim || net.output_dim() != env.action_dim {
                return Err(contract!(
                    "cloned expert is {}->{} but {} needs {}->{}",
                    net.input_dim(),
                    net.output_dim(),
                    env.env_id,
                    env.obs_dim,
                    env.action_dim
                ));
            }
        }
        Ok(())
    }
}

/// Expert action, always inside the action box.
pub fn expert_action(expert: &ExpertPolicy, env: &EnvSpec, observation: &[f64]) -> Result<Vec<f64>> {
    match expert {
        ExpertPolicy::Scripted => scripted_expert_action(env, observation),
        ExpertPolicy::Cloned(net) => {
            env.check_observation(observation)?;
            let y = net.forward(observation)?;
            env.check_action(&y)?;
            let mut a = scale_action(&env.action_low, &env.action_high, &y);
            env.clip_action(&mut a);
            Ok(a)
        }
    }
}
