//! Behaviour cloning: mini-batch Adam regression of actions on observations.

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::td3::scale_action;
use super::ExpertPolicy;
use crate::envs::EnvSpec;
use crate::error::{contract, ensure_dim, Error, Result};
use crate::numerics::{Activation, AdamConfig, AdamState, Batch, Network, NetworkSpec};
use crate::rng::Stream;

/// One demonstrated `(observation, action)` pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoPair {
    pub observation: Vec<f64>,
    pub action: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BcConfig {
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
}

impl Default for BcConfig {
    fn default() -> Self {
        BcConfig {
            hidden: alloc::vec![64, 64],
            epochs: 200,
            batch_size: 64,
            learning_rate: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BcReport {
    /// Mean squared action error over the full dataset after training.
    pub final_mse: f64,
    pub updates: usize,
}

/// Mean over samples and action components of the squared error.
fn action_mse(net: &Network, env: &EnvSpec, demos: &[DemoPair]) -> Result<f64> {
    let obs = Batch::from_rows(env.obs_dim, demos.iter().map(|d| d.observation.as_slice()))?;
    let cache = net.forward_batch(&obs)?;
    let mut total = 0.0;
    for (y, d) in cache.output().rows().zip(demos) {
        let a = scale_action(&env.action_low, &env.action_high, y);
        total += a.iter().zip(&d.action).map(|(p, t)| (p - t) * (p - t)).sum::<f64>();
    }
    Ok(total / (demos.len() * env.action_dim) as f64)
}

/// Trains a tanh-output network whose scaled output imitates `demos`.
pub fn bc_train(
    demos: &[DemoPair],
    env: &EnvSpec,
    spec: NetworkSpec,
    config: &BcConfig,
    rng: &mut Stream,
) -> Result<(ExpertPolicy, BcReport)> {
    if demos.is_empty() {
        return Err(Error::Empty("demonstrations"));
    }
    spec.validate()?;
    ensure_dim("cloned network input", env.obs_dim, spec.input_dim())?;
    ensure_dim("cloned network output", env.action_dim, spec.output_dim())?;
    if spec.output_activation != Activation::Tanh {
        return Err(contract!("cloned policies need a tanh output layer"));
    }
    if config.batch_size == 0 || config.epochs == 0 {
        return Err(contract!("epochs and batch size must be positive"));
    }
    for (i, d) in demos.iter().enumerate() {
        env.check_observation(&d.observation)?;
        env.check_action(&d.action)?;
        if !env.action_in_bounds(&d.action) {
            return Err(contract!("demonstration {i} has an out-of-bounds action"));
        }
    }

    let mut net = Network::init(spec, rng)?;
    let mut opt = AdamState::new(&net, AdamConfig::with_learning_rate(config.learning_rate))?;
    let half: Vec<f64> = env.action_half_range();
    let dim = env.action_dim;
    let mut order: Vec<usize> = (0..demos.len()).collect();
    let mut updates = 0;
    for _ in 0..config.epochs {
        order.shuffle(rng);
        for chunk in order.chunks(config.batch_size) {
            let obs = Batch::from_rows(env.obs_dim, chunk.iter().map(|&i| demos[i].observation.as_slice()))?;
            let cache = net.forward_batch(&obs)?;
            let scale = 2.0 / (chunk.len() * dim) as f64;
            let mut seed = Batch::zeros(chunk.len(), dim);
            for ((g, y), &i) in seed.data.chunks_exact_mut(dim).zip(cache.output().rows()).zip(chunk) {
                let a = scale_action(&env.action_low, &env.action_high, y);
                for k in 0..dim {
                    g[k] = scale * (a[k] - demos[i].action[k]) * half[k];
                }
            }
            let grads = net.backward_batch(&cache, &seed)?;
            opt.step(&mut net, &grads.params)?;
            updates += 1;
        }
    }
    let final_mse = action_mse(&net, env, demos)?;
    Ok((ExpertPolicy::Cloned(net), BcReport { final_mse, updates }))
}
