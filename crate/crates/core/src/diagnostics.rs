//! Discounted state-visitation estimates and critic-quality measurements.
//!
//! States are reduced to a fixed 2-D projection per environment (see
//! [`crate::envs::project`]) and binned on a 32×32 grid. A state visited at
//! step `t` of a trajectory deposits `(1 - γ)·γ^t`. Trajectories are finite,
//! so the geometric tail beyond the last step is dropped; the histogram is
//! renormalised and the average dropped mass reported alongside it.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::agents::Td3Agent;
use crate::envs::EnvId;
use crate::error::{contract, Error, Result};
use crate::harness::Rollout;
use crate::numerics::Batch;

pub const GRID_BINS: usize = 32;

/// One axis of the grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub bins: usize,
}

impl Axis {
    /// Bin index; out-of-range values land in the edge bins.
    fn index(&self, x: f64) -> (usize, bool) {
        let inside = (self.lo..=self.hi).contains(&x);
        let frac = (x - self.lo) / (self.hi - self.lo);
        let raw = libm::floor(frac * self.bins as f64);
        let idx = if raw.is_nan() || raw < 0.0 {
            0
        } else {
            (raw as usize).min(self.bins - 1)
        };
        (idx, !inside)
    }

    pub fn edges(&self) -> Vec<f64> {
        (0..=self.bins)
            .map(|i| self.lo + (self.hi - self.lo) * i as f64 / self.bins as f64)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Binning {
    pub x: Axis,
    pub y: Axis,
}

impl Binning {
    /// Pendulum: (wrapped angle, angular velocity) on [-π, π]×[-8, 8];
    /// point mass: (x, y) on [-5, 5]².
    pub fn for_env(env_id: EnvId) -> Self {
        let (x, y) = match env_id {
            EnvId::PendulumSwingup => ((-PI, PI), (-8.0, 8.0)),
            EnvId::PointMass2d => ((-5.0, 5.0), (-5.0, 5.0)),
        };
        Binning {
            x: Axis {
                lo: x.0,
                hi: x.1,
                bins: GRID_BINS,
            },
            y: Axis {
                lo: y.0,
                hi: y.1,
                bins: GRID_BINS,
            },
        }
    }

    pub fn cells(&self) -> usize {
        self.x.bins * self.y.bins
    }

    /// Row-major cell index (x major) and whether the point was clamped.
    pub fn cell(&self, p: [f64; 2]) -> (usize, bool) {
        let (ix, cx) = self.x.index(p[0]);
        let (iy, cy) = self.y.index(p[1]);
        (ix * self.y.bins + iy, cx || cy)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisitationHistogram {
    pub env_id: EnvId,
    pub binning: Binning,
    /// `x.bins × y.bins`, x major; sums to one.
    pub grid: Vec<f64>,
    pub gamma: f64,
    pub trajectory_count: usize,
    /// Visits that fell outside the grid and were clamped to an edge bin.
    pub clamped_visits: usize,
    /// Mean geometric mass `γ^len` lost past each trajectory's end.
    pub dropped_tail_mass: f64,
}

impl VisitationHistogram {
    pub fn mass(&self, p: [f64; 2]) -> f64 {
        self.grid[self.binning.cell(p).0]
    }

    fn check_congruent(&self, other: &VisitationHistogram) -> Result<()> {
        if self.binning != other.binning || self.env_id != other.env_id {
            return Err(contract!("histograms use different binnings"));
        }
        if self.gamma != other.gamma {
            return Err(contract!(
                "histograms use different discounts ({} vs {})",
                self.gamma,
                other.gamma
            ));
        }
        Ok(())
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if (0.0..1.0).contains(&gamma) {
        Ok(())
    } else {
        Err(contract!("discount {gamma} outside [0, 1)"))
    }
}

/// Discounted visitation histogram of projected trajectories.
pub fn estimate_visitation(
    env_id: EnvId,
    trajectories: &[Vec<[f64; 2]>],
    gamma: f64,
    binning: Binning,
) -> Result<VisitationHistogram> {
    check_gamma(gamma)?;
    if trajectories.iter().all(|t| t.is_empty()) {
        return Err(Error::Empty("trajectories"));
    }
    let mut grid = vec![0.0; binning.cells()];
    let mut clamped_visits = 0;
    let mut dropped = 0.0;
    let n = trajectories.len() as f64;
    for traj in trajectories {
        let mut weight = 1.0 - gamma;
        for &p in traj {
            let (cell, clamped) = binning.cell(p);
            grid[cell] += weight / n;
            clamped_visits += usize::from(clamped);
            weight *= gamma;
        }
        dropped += libm::pow(gamma, traj.len() as f64) / n;
    }
    let total: f64 = grid.iter().sum();
    grid.iter_mut().for_each(|g| *g /= total);
    Ok(VisitationHistogram {
        env_id,
        binning,
        grid,
        gamma,
        trajectory_count: trajectories.len(),
        clamped_visits,
        dropped_tail_mass: dropped,
    })
}

/// Half the L1 distance between two normalised grids.
pub fn total_variation(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| libm::fabs(x - y)).sum::<f64>()
}

/// Distance between the observed mixed-controller visitation and the
/// linear mixture `(1 - α)·d_expert + α·d_rl`.
pub fn mixture_gap(
    d_mix: &VisitationHistogram,
    d_expert: &VisitationHistogram,
    d_rl: &VisitationHistogram,
    alpha: f64,
) -> Result<f64> {
    d_mix.check_congruent(d_expert)?;
    d_mix.check_congruent(d_rl)?;
    if !(0.0..=1.0).contains(&alpha) {
        return Err(contract!("mixture weight {alpha} outside [0, 1]"));
    }
    let mixture: Vec<f64> = d_expert
        .grid
        .iter()
        .zip(&d_rl.grid)
        .map(|(&e, &r)| if e == r { e } else { (1.0 - alpha) * e + alpha * r })
        .collect();
    Ok(total_variation(&d_mix.grid, &mixture))
}

/// Near-goal region standing in for the set of high-value states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HighValueSet {
    pub env_id: EnvId,
}

impl HighValueSet {
    pub fn new(env_id: EnvId) -> Self {
        HighValueSet { env_id }
    }

    /// Pendulum: `|θ| < 0.5` and `|θ̇| < 2`; point mass: `‖p‖ < 0.5`.
    pub fn contains(&self, p: [f64; 2]) -> bool {
        match self.env_id {
            EnvId::PendulumSwingup => libm::fabs(p[0]) < 0.5 && libm::fabs(p[1]) < 2.0,
            EnvId::PointMass2d => libm::sqrt(p[0] * p[0] + p[1] * p[1]) < 0.5,
        }
    }
}

/// Discount-weighted share of visitation mass inside `set`.
pub fn high_value_fraction(trajectories: &[Vec<[f64; 2]>], set: HighValueSet, gamma: f64) -> Result<f64> {
    check_gamma(gamma)?;
    if trajectories.iter().all(|t| t.is_empty()) {
        return Err(Error::Empty("trajectories"));
    }
    let mut inside = 0.0;
    let mut total = 0.0;
    for traj in trajectories {
        let mut weight = 1.0 - gamma;
        for &p in traj {
            if set.contains(p) {
                inside += weight;
            }
            total += weight;
            weight *= gamma;
        }
    }
    Ok(inside / total)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueErrorReport {
    pub label: String,
    pub mse: f64,
    pub samples: usize,
    pub gamma: f64,
}

/// Discounted return-to-go at every step, truncated at the trajectory end.
pub fn returns_to_go(rewards: &[f64], gamma: f64) -> Vec<f64> {
    let mut out = vec![0.0; rewards.len()];
    let mut acc = 0.0;
    for (slot, r) in out.iter_mut().zip(rewards).rev() {
        acc = r + gamma * acc;
        *slot = acc;
    }
    out
}

/// Mean squared error between `min(Q1, Q2)(s, actor(s))` and the Monte-Carlo
/// return-to-go over every state of `rollouts`.
pub fn critic_value_error(
    agent: &Td3Agent,
    rollouts: &[Rollout],
    gamma: f64,
    label: &str,
) -> Result<ValueErrorReport> {
    check_gamma(gamma)?;
    let samples: usize = rollouts.iter().map(|r| r.observations.len()).sum();
    if samples == 0 {
        return Err(Error::Empty("trajectories"));
    }
    let mut squared = 0.0;
    for r in rollouts {
        if r.observations.is_empty() {
            continue;
        }
        let obs = Batch::from_rows(agent.obs_dim(), r.observations.iter().map(|o| o.as_slice()))?;
        let values = agent.value_estimates(&obs)?;
        for (v, g) in values.iter().zip(returns_to_go(&r.rewards, gamma)) {
            squared += (v - g) * (v - g);
        }
    }
    Ok(ValueErrorReport {
        label: label.into(),
        mse: squared / samples as f64,
        samples,
        gamma,
    })
}
