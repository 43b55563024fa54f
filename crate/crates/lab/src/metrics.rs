//! Per-run metrics CSV: one row per environment step, evaluation columns
//! filled on evaluation steps and empty elsewhere.

use std::fs::{File, OpenOptions};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use dai_core::harness::{EvalLog, RunMetrics, StepLog};
use dai_core::stats::ReturnStats;

use crate::error::{LabError, Result};

pub const HEADER: [&str; 7] = [
    "step",
    "alpha",
    "episode_return",
    "eval_mean",
    "eval_median",
    "eval_ci_lo",
    "eval_ci_hi",
];

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn row(step: &StepLog, eval: Option<&ReturnStats>) -> [String; 7] {
    [
        step.t.to_string(),
        step.alpha.to_string(),
        opt(step.episode_return),
        opt(eval.map(|s| s.mean)),
        opt(eval.map(|s| s.median)),
        opt(eval.map(|s| s.median_ci.0)),
        opt(eval.map(|s| s.median_ci.1)),
    ]
}

/// Appends rows to a metrics file that must not exist yet.
pub struct MetricsWriter {
    path: PathBuf,
    out: csv::Writer<BufWriter<File>>,
}

impl MetricsWriter {
    pub fn create(path: &Path) -> Result<Self> {
        let file = OpenOptions::new()
            .append(true)
            .create_new(true)
            .open(path)
            .map_err(|e| LabError::io(path, e))?;
        let mut w = MetricsWriter {
            path: path.to_path_buf(),
            out: csv::Writer::from_writer(BufWriter::new(file)),
        };
        w.write(&HEADER.map(String::from))?;
        Ok(w)
    }

    fn write(&mut self, record: &[String; 7]) -> Result<()> {
        self.out
            .write_record(record)
            .map_err(|e| LabError::io(&self.path, e.into()))
    }

    pub fn append(&mut self, step: &StepLog, eval: Option<&ReturnStats>) -> Result<()> {
        self.write(&row(step, eval))
    }

    /// Writes every step of `metrics`, e.g. the history carried by a
    /// resumed checkpoint.
    pub fn append_all(&mut self, metrics: &RunMetrics) -> Result<()> {
        let mut evals = metrics.evals.iter().peekable();
        for step in &metrics.steps {
            let eval = evals.next_if(|e| e.t == step.t).map(|e| &e.stats);
            self.append(step, eval)?;
        }
        Ok(())
    }

    pub fn flush(&mut self) -> Result<()> {
        // Flushes the buffered file as well.
        self.out.flush().map_err(|e| LabError::io(&self.path, e))
    }
}

pub fn write_metrics(metrics: &RunMetrics, path: &Path) -> Result<()> {
    let mut w = MetricsWriter::create(path)?;
    w.append_all(metrics)?;
    w.flush()
}

/// Evaluation rows of a metrics CSV: `(step, mean, median)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalPoint {
    pub t: u64,
    pub mean: f64,
    pub median: f64,
}

pub fn read_eval_points(path: &Path) -> Result<Vec<EvalPoint>> {
    let bad = |reason: String| LabError::Corrupt {
        path: path.to_path_buf(),
        reason,
    };
    let mut r = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => LabError::io(path, io),
        other => bad(format!("{other:?}")),
    })?;
    let headers = r.headers().map_err(|e| bad(e.to_string()))?.clone();
    if headers.iter().ne(HEADER) {
        return Err(bad(format!("unexpected columns {headers:?}")));
    }
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        if rec[3].is_empty() {
            continue;
        }
        let num = |k: usize| rec[k].parse::<f64>().map_err(|e| bad(format!("row {}: {e}", i + 2)));
        out.push(EvalPoint {
            t: rec[0].parse().map_err(|e| bad(format!("row {}: {e}", i + 2)))?,
            mean: num(3)?,
            median: num(4)?,
        });
    }
    Ok(out)
}

pub fn eval_points(evals: &[EvalLog]) -> Vec<EvalPoint> {
    evals
        .iter()
        .map(|e| EvalPoint {
            t: e.t,
            mean: e.stats.mean,
            median: e.stats.median,
        })
        .collect()
}
