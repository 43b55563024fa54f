//! Run directories.
//!
//! A training run writes into a fresh directory:
//!
//! - `config.cfg`: the fully resolved configuration,
//! - `metrics.csv`: one row per step, appended as the run progresses,
//! - `step_<t>.ckpt`: optional periodic checkpoints,
//! - `final.ckpt`: the state after the last step,
//! - `summary.json`: counters, the last evaluation and wall-clock time.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use dai_core::harness::{RunConfig, Trainer};
use dai_core::stats::ReturnStats;
use serde::{Deserialize, Serialize};

use crate::checkpoint::{save_trainer, trainer_for};
use crate::config::render_config;
use crate::container::write_atomic;
use crate::error::{LabError, Result};
use crate::metrics::MetricsWriter;

pub const CONFIG_FILE: &str = "config.cfg";
pub const METRICS_FILE: &str = "metrics.csv";
pub const FINAL_CHECKPOINT: &str = "final.ckpt";
pub const SUMMARY_FILE: &str = "summary.json";

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Save `step_<t>.ckpt` every this many steps.
    pub checkpoint_every: Option<u64>,
    /// Stop early at this step (the final checkpoint is still written).
    pub stop_at: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub seed: u64,
    pub steps: u64,
    pub updates: u64,
    pub final_eval: Option<ReturnStats>,
    pub wall_clock_secs: f64,
}

pub fn seed_dir(out: &Path, seed: u64) -> PathBuf {
    out.join(format!("seed_{seed}"))
}

/// Root for outputs not given explicitly: `DAI_OUTPUT_ROOT` if set.
pub fn output_root(fallback: &str) -> PathBuf {
    std::env::var_os("DAI_OUTPUT_ROOT")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(fallback))
}

fn fresh_dir(dir: &Path) -> Result<()> {
    if dir.exists() {
        let non_empty = fs::read_dir(dir)
            .map_err(|e| LabError::io(dir, e))?
            .next()
            .is_some();
        if non_empty {
            return Err(LabError::Usage(format!(
                "{}: run directory already has contents; runs never overwrite each other",
                dir.display()
            )));
        }
    }
    fs::create_dir_all(dir).map_err(|e| LabError::io(dir, e))
}

fn drive(mut trainer: Trainer, dir: &Path, options: &RunOptions) -> Result<(Trainer, RunSummary)> {
    let start = Instant::now();
    let cfg_path = dir.join(CONFIG_FILE);
    write_atomic(&cfg_path, render_config(&trainer.config).as_bytes())?;
    let mut metrics = MetricsWriter::create(&dir.join(METRICS_FILE))?;
    metrics.append_all(&trainer.metrics)?;
    let until = options
        .stop_at
        .unwrap_or(trainer.config.total_steps)
        .min(trainer.config.total_steps);
    while trainer.t < until {
        let outcome = trainer.step()?;
        let log = trainer.metrics.steps.last().expect("step was logged");
        metrics.append(log, outcome.eval.as_ref())?;
        if let Some(every) = options.checkpoint_every.filter(|&n| n > 0) {
            if outcome.t % every == 0 && outcome.t < until {
                metrics.flush()?;
                save_trainer(&trainer, &dir.join(format!("step_{}.ckpt", outcome.t)))?;
            }
        }
    }
    metrics.flush()?;
    let elapsed = start.elapsed().as_secs_f64();
    trainer.metrics.wall_clock_secs = Some(trainer.metrics.wall_clock_secs.unwrap_or(0.0) + elapsed);
    save_trainer(&trainer, &dir.join(FINAL_CHECKPOINT))?;
    let summary = RunSummary {
        seed: trainer.config.seed,
        steps: trainer.t,
        updates: trainer.metrics.updates,
        final_eval: trainer.metrics.evals.last().map(|e| e.stats),
        wall_clock_secs: elapsed,
    };
    let json = serde_json::to_vec_pretty(&summary).expect("summary serializes");
    write_atomic(&dir.join(SUMMARY_FILE), &json)?;
    Ok((trainer, summary))
}

/// Trains `config` from scratch into the fresh directory `dir`.
pub fn train_run(config: RunConfig, dir: &Path, options: &RunOptions) -> Result<(Trainer, RunSummary)> {
    let trainer = trainer_for(config)?;
    fresh_dir(dir)?;
    drive(trainer, dir, options)
}

/// Continues a checkpointed run in a fresh directory. The new metrics file
/// repeats the checkpoint's history, so it matches an uninterrupted run.
pub fn resume_run(trainer: Trainer, dir: &Path, options: &RunOptions) -> Result<(Trainer, RunSummary)> {
    fresh_dir(dir)?;
    drive(trainer, dir, options)
}

/// Runs one directory per seed under `out`, using up to `jobs` threads.
pub fn train_seeds(base: &RunConfig, seeds: &[u64], out: &Path, jobs: usize, options: &RunOptions) -> Result<Vec<RunSummary>> {
    let jobs = jobs.max(1).min(seeds.len().max(1));
    let configs: Vec<RunConfig> = seeds
        .iter()
        .map(|&seed| RunConfig { seed, ..base.clone() })
        .collect();
    let run_one = |c: &RunConfig| train_run(c.clone(), &seed_dir(out, c.seed), options).map(|(_, s)| s);
    if jobs == 1 {
        return configs.iter().map(run_one).collect();
    }
    let next = std::sync::atomic::AtomicUsize::new(0);
    let mut results: Vec<Option<Result<RunSummary>>> = (0..configs.len()).map(|_| None).collect();
    let slots = std::sync::Mutex::new(&mut results);
    std::thread::scope(|scope| {
        for _ in 0..jobs {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                let Some(c) = configs.get(i) else { break };
                let r = run_one(c);
                slots.lock().expect("no worker panics while holding the lock")[i] = Some(r);
            });
        }
    });
    results
        .into_iter()
        .map(|r| r.expect("every seed was run"))
        .collect()
}
