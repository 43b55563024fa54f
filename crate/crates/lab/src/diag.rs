//! Visitation diagnostics over recorded trajectories, and the α sweep.

use std::fmt::Write as _;
use std::path::Path;

use dai_core::agents::{ExpertPolicy, Td3Agent};
use dai_core::diagnostics::{
    estimate_visitation, high_value_fraction, mixture_gap, total_variation, Binning, HighValueSet, VisitationHistogram,
};
use dai_core::envs::EnvSpec;
use dai_core::harness::{rollouts, MixedPolicy};

use crate::container::write_atomic;
use crate::error::{LabError, Result};
use crate::trajectory::{TrajectoryHeader, TrajectorySet};

pub const SWEEP_ALPHAS: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

#[derive(Debug, Clone, PartialEq)]
pub struct SetDiagnostics {
    pub name: String,
    pub policy: String,
    pub alpha: Option<f64>,
    pub episodes: usize,
    pub histogram: VisitationHistogram,
    pub high_value_fraction: f64,
    /// TV to the α-mixture of the α = 0 and α = 1 sets, when both exist.
    pub mixture_gap: Option<f64>,
}

pub fn analyze(sets: &[(String, TrajectorySet)], gamma: f64) -> Result<Vec<SetDiagnostics>> {
    let Some((_, first)) = sets.first() else {
        return Err(LabError::Usage("no trajectory files given".into()));
    };
    let env_id = first.header.env_id;
    let binning = Binning::for_env(env_id);
    let mut out = Vec::new();
    for (name, set) in sets {
        if set.header.env_id != env_id {
            return Err(LabError::Usage(format!(
                "{name} records {} but {} records {env_id}",
                set.header.env_id, sets[0].0
            )));
        }
        let states = set.states();
        out.push(SetDiagnostics {
            name: name.clone(),
            policy: set.header.policy.clone(),
            alpha: set.header.alpha,
            episodes: set.episodes.len(),
            histogram: estimate_visitation(env_id, &states, gamma, binning)?,
            high_value_fraction: high_value_fraction(&states, HighValueSet::new(env_id), gamma)?,
            mixture_gap: None,
        });
    }
    let endpoint = |a: f64| out.iter().find(|d| d.alpha == Some(a)).map(|d| d.histogram.clone());
    if let (Some(d_exp), Some(d_rl)) = (endpoint(0.0), endpoint(1.0)) {
        for d in &mut out {
            if let Some(a) = d.alpha {
                d.mixture_gap = Some(mixture_gap(&d.histogram, &d_exp, &d_rl, a)?);
            }
        }
    }
    Ok(out)
}

pub fn write_diagnostics(diags: &[SetDiagnostics], out: &Path) -> Result<()> {
    let mut csv = String::from("name,policy,alpha,episodes,high_value_fraction,mixture_gap,clamped_visits,dropped_tail_mass\n");
    for d in diags {
        let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
        writeln!(
            csv,
            "{},{},{},{},{},{},{},{}",
            d.name,
            d.policy,
            opt(d.alpha),
            d.episodes,
            d.high_value_fraction,
            opt(d.mixture_gap),
            d.histogram.clamped_visits,
            d.histogram.dropped_tail_mass
        )
        .expect("string write");
    }
    let mut tv = String::from("a,b,total_variation\n");
    for (i, a) in diags.iter().enumerate() {
        for b in &diags[i + 1..] {
            writeln!(tv, "{},{},{}", a.name, b.name, total_variation(&a.histogram.grid, &b.histogram.grid))
                .expect("string write");
        }
    }
    let mut text = String::new();
    for d in diags {
        writeln!(
            text,
            "{}: policy {}, {} episodes, high-value fraction {:.4}{}",
            d.name,
            d.policy,
            d.episodes,
            d.high_value_fraction,
            d.mixture_gap.map(|g| format!(", mixture gap {g:.3e}")).unwrap_or_default()
        )
        .expect("string write");
    }
    write_atomic(&out.join("diagnostics.csv"), csv.as_bytes())?;
    write_atomic(&out.join("total_variation.csv"), tv.as_bytes())?;
    write_atomic(&out.join("summary.txt"), text.as_bytes())
}

/// Records seed-matched rollouts of the fixed-α controller at each α.
pub fn sweep_trajectories(
    expert: &ExpertPolicy,
    agent: &Td3Agent,
    env: &EnvSpec,
    alphas: &[f64],
    episodes: usize,
    seed: u64,
    gamma: f64,
) -> Result<Vec<(String, TrajectorySet)>> {
    alphas
        .iter()
        .map(|&alpha| {
            let policy = MixedPolicy { expert, agent, alpha };
            let runs = rollouts(&policy, env, episodes, seed)?;
            let header = TrajectoryHeader {
                env_id: env.env_id,
                policy: format!("mixed:{}", expert.kind()),
                schedule: None,
                alpha: Some(alpha),
                seed,
                gamma,
                rows: 0,
            };
            Ok((format!("alpha_{alpha}"), TrajectorySet::from_rollouts(header, &runs)))
        })
        .collect()
}
