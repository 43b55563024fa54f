//! Demonstration datasets (`DAIDEMO1`): one `observation ⧺ action` row of
//! doubles per environment step.

use std::path::Path;

use dai_core::agents::{DemoPair, ExpertPolicy};
use dai_core::envs::{EnvId, EnvSpec};
use dai_core::harness::rollouts;
use serde::{Deserialize, Serialize};

use crate::container;
use crate::error::{LabError, Result};

pub const MAGIC: &[u8; 8] = b"DAIDEMO1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoHeader {
    pub env_id: EnvId,
    pub obs_dim: usize,
    pub action_dim: usize,
    pub episodes: usize,
    pub seed: u64,
    pub rows: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DemoSet {
    pub header: DemoHeader,
    pub pairs: Vec<DemoPair>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollectSummary {
    pub pairs: usize,
    pub mean_return: f64,
}

impl DemoSet {
    pub fn encode(&self) -> Result<Vec<u8>> {
        let h = &self.header;
        let mut data = Vec::with_capacity(self.pairs.len() * (h.obs_dim + h.action_dim));
        for p in &self.pairs {
            data.extend_from_slice(&p.observation);
            data.extend_from_slice(&p.action);
        }
        container::encode(MAGIC, h, &data)
    }

    pub fn decode(bytes: &[u8], path: &Path) -> Result<Self> {
        let (header, data): (DemoHeader, Vec<f64>) = container::decode(MAGIC, bytes, path)?;
        let env = EnvSpec::new(header.env_id);
        let width = header.obs_dim + header.action_dim;
        if header.obs_dim != env.obs_dim || header.action_dim != env.action_dim {
            return Err(LabError::Corrupt {
                path: path.to_path_buf(),
                reason: format!("dimensions {}+{} do not match {}", header.obs_dim, header.action_dim, header.env_id),
            });
        }
        if data.len() != header.rows * width {
            return Err(LabError::Corrupt {
                path: path.to_path_buf(),
                reason: format!("expected {} rows of {width} values, found {} values", header.rows, data.len()),
            });
        }
        let pairs = data
            .chunks_exact(width)
            .map(|row| DemoPair {
                observation: row[..header.obs_dim].to_vec(),
                action: row[header.obs_dim..].to_vec(),
            })
            .collect();
        Ok(DemoSet { header, pairs })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::decode(&container::read_file(path)?, path)
    }
}

/// Noiseless expert rollouts with episode seeds `seed, seed + 1, ..`.
pub fn demonstrations(expert: &ExpertPolicy, env_id: EnvId, episodes: usize, seed: u64) -> Result<(DemoSet, f64)> {
    if episodes == 0 {
        return Err(LabError::Usage("collecting needs at least one episode".into()));
    }
    let env = EnvSpec::new(env_id);
    let runs = rollouts(expert, &env, episodes, seed)?;
    let mean_return = runs.iter().map(|r| r.total_return()).sum::<f64>() / episodes as f64;
    let pairs: Vec<DemoPair> = runs
        .into_iter()
        .flat_map(|r| {
            r.observations
                .into_iter()
                .zip(r.actions)
                .map(|(observation, action)| DemoPair { observation, action })
        })
        .collect();
    let header = DemoHeader {
        env_id,
        obs_dim: env.obs_dim,
        action_dim: env.action_dim,
        episodes,
        seed,
        rows: pairs.len(),
    };
    Ok((DemoSet { header, pairs }, mean_return))
}

pub fn collect_demonstrations(
    expert: &ExpertPolicy,
    env_id: EnvId,
    episodes: usize,
    seed: u64,
    out_path: &Path,
) -> Result<CollectSummary> {
    let (set, mean_return) = demonstrations(expert, env_id, episodes, seed)?;
    container::write_atomic(out_path, &set.encode()?)?;
    Ok(CollectSummary {
        pairs: set.pairs.len(),
        mean_return,
    })
}
