//! Summary statistics and percentile bootstrap.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Stream;

pub const BOOTSTRAP_RESAMPLES: usize = 10_000;
pub const CONFIDENCE: f64 = 0.95;

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n - 1); zero for fewer than two values.
pub fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    libm::sqrt(ss / (xs.len() - 1) as f64)
}

fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Linear-interpolation quantile of already sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = q.clamp(0.0, 1.0) * (n - 1) as f64;
    let lo = libm::floor(pos) as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

pub fn quantile(xs: &[f64], q: f64) -> f64 {
    quantile_sorted(&sorted(xs), q)
}

pub fn median(xs: &[f64]) -> f64 {
    quantile(xs, 0.5)
}

/// Percentile-bootstrap confidence interval of the median.
pub fn bootstrap_median_ci(xs: &[f64], resamples: usize, rng: &mut Stream) -> (f64, f64) {
    let n = xs.len();
    let mut medians = Vec::with_capacity(resamples);
    let mut buf = alloc::vec![0.0; n];
    for _ in 0..resamples {
        for slot in buf.iter_mut() {
            *slot = xs[rng.below(n)];
        }
        buf.sort_by(f64::total_cmp);
        medians.push(quantile_sorted(&buf, 0.5));
    }
    medians.sort_by(f64::total_cmp);
    let tail = (1.0 - CONFIDENCE) / 2.0;
    (quantile_sorted(&medians, tail), quantile_sorted(&medians, 1.0 - tail))
}

/// Keeps values inside the `[Q1 - 1.5·IQR, Q3 + 1.5·IQR]` fences.
pub fn iqr_filter(xs: &[f64]) -> Vec<f64> {
    if xs.len() < 4 {
        return xs.to_vec();
    }
    let s = sorted(xs);
    let q1 = quantile_sorted(&s, 0.25);
    let q3 = quantile_sorted(&s, 0.75);
    let fence = 1.5 * (q3 - q1);
    xs.iter()
        .copied()
        .filter(|&x| x >= q1 - fence && x <= q3 + fence)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReturnStats {
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
    pub median_ci: (f64, f64),
}

impl ReturnStats {
    pub fn from_returns(returns: &[f64], bootstrap_seed: u64) -> Result<Self> {
        if returns.is_empty() {
            return Err(Error::Empty("returns"));
        }
        let mut rng = Stream::new(bootstrap_seed, crate::rng::labels::BOOTSTRAP);
        Ok(ReturnStats {
            count: returns.len(),
            mean: mean(returns),
            median: median(returns),
            std: std_dev(returns),
            min: returns.iter().copied().fold(f64::INFINITY, f64::min),
            max: returns.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            median_ci: bootstrap_median_ci(returns, BOOTSTRAP_RESAMPLES, &mut rng),
        })
    }
}
