//! Recorded trajectories (`DAITRAJ1`) for offline diagnostics. Each row is
//! `(projection x, projection y, reward, done)`; `done = 1` closes an episode.

use std::path::Path;

use dai_core::dai::ScheduleSpec;
use dai_core::envs::EnvId;
use dai_core::harness::Rollout;
use serde::{Deserialize, Serialize};

use crate::container;
use crate::error::{LabError, Result};

pub const MAGIC: &[u8; 8] = b"DAITRAJ1";
const ROW: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryHeader {
    pub env_id: EnvId,
    pub policy: String,
    pub schedule: Option<ScheduleSpec>,
    /// Fixed mixing weight the policy ran at, if any.
    pub alpha: Option<f64>,
    pub seed: u64,
    pub gamma: f64,
    pub rows: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    pub states: Vec<[f64; 2]>,
    pub rewards: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySet {
    pub header: TrajectoryHeader,
    pub episodes: Vec<Episode>,
}

impl TrajectorySet {
    pub fn from_rollouts(header: TrajectoryHeader, rollouts: &[Rollout]) -> Self {
        let episodes: Vec<Episode> = rollouts
            .iter()
            .map(|r| Episode {
                states: r.projected(),
                rewards: r.rewards.clone(),
            })
            .collect();
        let rows = episodes.iter().map(|e| e.states.len()).sum();
        TrajectorySet {
            header: TrajectoryHeader { rows, ..header },
            episodes,
        }
    }

    pub fn states(&self) -> Vec<Vec<[f64; 2]>> {
        self.episodes.iter().map(|e| e.states.clone()).collect()
    }

    pub fn encode(&self) -> Result<Vec<u8>> {
        let mut data = Vec::with_capacity(self.header.rows * ROW);
        for e in &self.episodes {
            let last = e.states.len().saturating_sub(1);
            for (i, (p, r)) in e.states.iter().zip(&e.rewards).enumerate() {
                data.extend_from_slice(&[p[0], p[1], *r, if i == last { 1.0 } else { 0.0 }]);
            }
        }
        container::encode(MAGIC, &self.header, &data)
    }

    pub fn decode(bytes: &[u8], path: &Path) -> Result<Self> {
        let (header, data): (TrajectoryHeader, Vec<f64>) = container::decode(MAGIC, bytes, path)?;
        let corrupt = |reason: String| LabError::Corrupt {
            path: path.to_path_buf(),
            reason,
        };
        if data.len() != header.rows * ROW {
            return Err(corrupt(format!("expected {} rows, found {} values", header.rows, data.len())));
        }
        let mut episodes = Vec::new();
        let mut current = Episode {
            states: Vec::new(),
            rewards: Vec::new(),
        };
        for row in data.chunks_exact(ROW) {
            current.states.push([row[0], row[1]]);
            current.rewards.push(row[2]);
            if row[3] != 0.0 {
                episodes.push(std::mem::replace(
                    &mut current,
                    Episode {
                        states: Vec::new(),
                        rewards: Vec::new(),
                    },
                ));
            }
        }
        if !current.states.is_empty() {
            return Err(corrupt("last episode has no done flag".into()));
        }
        Ok(TrajectorySet { header, episodes })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        container::write_atomic(path, &self.encode()?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::decode(&container::read_file(path)?, path)
    }
}
