//! Multi-seed comparison reports.
//!
//! A manifest is a `key = value` document:
//!
//! ```text
//! seeds = 1,2,3,4,5
//! arm.td3 = runs/td3            # directory holding seed_<s>/ run directories
//! arm.td3_dai = runs/td3_dai
//! early_fraction = 0.25         # optional, default 0.25
//! expert_return = -170.5        # optional reference line in the plot
//! outliers = off                # off | per_run | per_step
//! ```
//!
//! Relative arm paths are resolved against the manifest's directory. The
//! per-seed score at a step is that run's mean evaluation return. Bootstrap
//! intervals use seed [`REPORT_BOOTSTRAP_SEED`].

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use dai_core::envs::EnvId;
use dai_core::harness::RunConfig;
use dai_core::stats::{iqr_filter, mean, std_dev, ReturnStats};

use crate::config::load_config;
use crate::container::write_atomic;
use crate::error::{LabError, Result};
use crate::metrics::{read_eval_points, EvalPoint};
use crate::run::{seed_dir, CONFIG_FILE, METRICS_FILE};

pub const REPORT_BOOTSTRAP_SEED: u64 = 20_240_601;
pub const DEFAULT_EARLY_FRACTION: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutlierMode {
    Off,
    /// Drop whole seeds whose final return lies outside the 1.5·IQR fence.
    PerRun,
    /// Apply the fence separately to the seeds' values at every step.
    PerStep,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Arm {
    pub label: String,
    pub dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentManifest {
    pub arms: Vec<Arm>,
    pub seeds: Vec<u64>,
    pub early_fraction: f64,
    pub expert_return: Option<f64>,
    pub outliers: OutlierMode,
}

impl ExperimentManifest {
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut errors = Vec::new();
        let mut arms = Vec::new();
        let mut seeds = None;
        let mut early_fraction = DEFAULT_EARLY_FRACTION;
        let mut expert_return = None;
        let mut outliers = OutlierMode::Off;
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=').map(|(k, v)| (k.trim(), v.trim())) else {
                errors.push(format!("line {}: expected `key = value`", i + 1));
                continue;
            };
            let mut fail = |what: &str| errors.push(format!("line {}: {k}: {what} `{v}`", i + 1));
            match k {
                "seeds" => match v.split(',').map(|s| s.trim().parse::<u64>()).collect() {
                    Ok(list) => seeds = Some(list),
                    Err(_) => fail("bad seed list"),
                },
                "early_fraction" => match v.parse::<f64>() {
                    Ok(f) if f > 0.0 && f <= 1.0 => early_fraction = f,
                    _ => fail("fraction must be in (0, 1], got"),
                },
                "expert_return" => match v.parse::<f64>() {
                    Ok(x) if x.is_finite() => expert_return = Some(x),
                    _ => fail("bad number"),
                },
                "outliers" => match v {
                    "off" => outliers = OutlierMode::Off,
                    "per_run" => outliers = OutlierMode::PerRun,
                    "per_step" => outliers = OutlierMode::PerStep,
                    _ => fail("expected off, per_run or per_step, got"),
                },
                _ => match k.strip_prefix("arm.") {
                    Some(label) if !label.is_empty() => {
                        if arms.iter().any(|a: &Arm| a.label == label) {
                            fail("duplicate arm");
                        } else {
                            arms.push(Arm {
                                label: label.to_string(),
                                dir: base.join(v),
                            });
                        }
                    }
                    _ => errors.push(format!("line {}: unknown key `{k}`", i + 1)),
                },
            }
        }
        let seeds: Vec<u64> = seeds.unwrap_or_default();
        if seeds.is_empty() {
            errors.push("`seeds` is required".into());
        }
        if arms.is_empty() {
            errors.push("at least one `arm.<label>` is required".into());
        }
        if !errors.is_empty() {
            return Err(LabError::Config(errors));
        }
        Ok(ExperimentManifest {
            arms,
            seeds,
            early_fraction,
            expert_return,
            outliers,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| LabError::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }
}

/// Evaluation curves of one arm, one per seed, all on the same steps.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmData {
    pub label: String,
    pub steps: Vec<u64>,
    /// `scores[seed][step]`.
    pub scores: Vec<Vec<f64>>,
    pub seeds: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentData {
    pub env_id: EnvId,
    pub total_steps: u64,
    pub arms: Vec<ArmData>,
}

/// Builds per-arm data from in-memory curves; used by `load_experiment` and
/// by callers that already hold metrics.
pub fn arm_from_curves(label: &str, seeds: &[u64], curves: &[Vec<EvalPoint>]) -> Result<ArmData> {
    let mut steps: Option<Vec<u64>> = None;
    let mut scores = Vec::new();
    for (&seed, points) in seeds.iter().zip(curves) {
        let s: Vec<u64> = points.iter().map(|p| p.t).collect();
        let v: Vec<f64> = points.iter().map(|p| p.mean).collect();
        match &steps {
            None => steps = Some(s),
            Some(reference) if *reference != s => {
                let gap = reference
                    .iter()
                    .find(|t| !s.contains(t))
                    .or_else(|| s.iter().find(|t| !reference.contains(t)));
                return Err(LabError::Missing(format!(
                    "arm {label} seed {seed}: evaluation steps differ from the other seeds (first difference at step {})",
                    gap.map_or("?".into(), u64::to_string)
                )));
            }
            Some(_) => {}
        }
        scores.push(v);
    }
    Ok(ArmData {
        label: label.to_string(),
        steps: steps.unwrap_or_default(),
        scores,
        seeds: seeds.to_vec(),
    })
}

pub fn load_experiment(manifest: &ExperimentManifest) -> Result<ExperimentData> {
    let mut reference: Option<RunConfig> = None;
    let mut arms = Vec::new();
    for arm in &manifest.arms {
        let mut curves = Vec::new();
        for &seed in &manifest.seeds {
            let dir = seed_dir(&arm.dir, seed);
            let metrics = dir.join(METRICS_FILE);
            if !metrics.exists() {
                return Err(LabError::Missing(format!(
                    "arm {} seed {seed}: no {}",
                    arm.label,
                    metrics.display()
                )));
            }
            let config = load_config::<&str>(&dir.join(CONFIG_FILE), &[])?;
            match &reference {
                None => reference = Some(config),
                Some(r) if r.env_id != config.env_id || r.total_steps != config.total_steps => {
                    return Err(LabError::Usage(format!(
                        "arm {} seed {seed} runs {} for {} steps, but other runs use {} for {} steps",
                        arm.label, config.env_id, config.total_steps, r.env_id, r.total_steps
                    )));
                }
                Some(_) => {}
            }
            curves.push(read_eval_points(&metrics)?);
        }
        arms.push(arm_from_curves(&arm.label, &manifest.seeds, &curves)?);
    }
    let reference = reference.expect("manifest has arms and seeds");
    Ok(ExperimentData {
        env_id: reference.env_id,
        total_steps: reference.total_steps,
        arms,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub t: u64,
    pub n: usize,
    pub median: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub label: String,
    pub t: u64,
    pub n: usize,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Delta {
    pub table: &'static str,
    pub a: String,
    pub b: String,
    pub delta_mean: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub curves: Vec<(String, Vec<CurvePoint>)>,
    pub early: Vec<TableRow>,
    pub final_: Vec<TableRow>,
    pub deltas: Vec<Delta>,
    pub early_step: u64,
    pub expert_return: Option<f64>,
    pub total_steps: u64,
}

/// Seeds kept under per-run outlier removal.
fn kept_seeds(arm: &ArmData, mode: OutlierMode) -> Vec<usize> {
    let all: Vec<usize> = (0..arm.scores.len()).collect();
    if mode != OutlierMode::PerRun || arm.steps.is_empty() {
        return all;
    }
    let finals: Vec<f64> = arm.scores.iter().map(|s| *s.last().expect("non-empty")).collect();
    let kept = iqr_filter(&finals);
    all.into_iter().filter(|&i| kept.contains(&finals[i])).collect()
}

fn column(arm: &ArmData, kept: &[usize], k: usize) -> Vec<f64> {
    kept.iter().map(|&i| arm.scores[i][k]).collect()
}

/// Index of step `t` in the shared evaluation grid.
fn step_index(arm: &ArmData, t: u64, what: &str) -> Result<usize> {
    arm.steps.iter().position(|&s| s == t).ok_or_else(|| {
        LabError::Missing(format!("arm {}: no evaluation at step {t} for the {what} table", arm.label))
    })
}

pub fn early_step(total_steps: u64, fraction: f64) -> u64 {
    (fraction * total_steps as f64).round() as u64
}

pub fn build_report(data: &ExperimentData, manifest: &ExperimentManifest) -> Result<Report> {
    let early_step = early_step(data.total_steps, manifest.early_fraction);
    let mut curves = Vec::new();
    let mut early = Vec::new();
    let mut final_ = Vec::new();
    for arm in &data.arms {
        let kept = kept_seeds(arm, manifest.outliers);
        let mut points = Vec::with_capacity(arm.steps.len());
        for (k, &t) in arm.steps.iter().enumerate() {
            let mut values = column(arm, &kept, k);
            if manifest.outliers == OutlierMode::PerStep {
                values = iqr_filter(&values);
            }
            let s = ReturnStats::from_returns(&values, REPORT_BOOTSTRAP_SEED)?;
            points.push(CurvePoint {
                t,
                n: values.len(),
                median: s.median,
                ci_lo: s.median_ci.0,
                ci_hi: s.median_ci.1,
            });
        }
        curves.push((arm.label.clone(), points));
        for (table, t, what) in [
            (&mut early, early_step, "early"),
            (&mut final_, data.total_steps, "final"),
        ] {
            let values = column(arm, &kept, step_index(arm, t, what)?);
            table.push(TableRow {
                label: arm.label.clone(),
                t,
                n: values.len(),
                mean: mean(&values),
                std: std_dev(&values),
            });
        }
    }
    let mut deltas = Vec::new();
    for (name, table) in [("early", &early), ("final", &final_)] {
        for (i, a) in table.iter().enumerate() {
            for b in &table[i + 1..] {
                deltas.push(Delta {
                    table: name,
                    a: a.label.clone(),
                    b: b.label.clone(),
                    delta_mean: a.mean - b.mean,
                });
            }
        }
    }
    Ok(Report {
        curves,
        early,
        final_,
        deltas,
        early_step,
        expert_return: manifest.expert_return,
        total_steps: data.total_steps,
    })
}

impl Report {
    pub fn curve_csv(&self) -> String {
        let mut s = String::from("arm,step,n,median,ci_lo,ci_hi\n");
        for (label, points) in &self.curves {
            for p in points {
                writeln!(s, "{label},{},{},{},{},{}", p.t, p.n, p.median, p.ci_lo, p.ci_hi).expect("string write");
            }
        }
        s
    }

    pub fn table_csv(rows: &[TableRow]) -> String {
        let mut s = String::from("arm,step,n,mean,std\n");
        for r in rows {
            writeln!(s, "{},{},{},{},{}", r.label, r.t, r.n, r.mean, r.std).expect("string write");
        }
        s
    }

    pub fn deltas_csv(&self) -> String {
        let mut s = String::from("table,arm_a,arm_b,delta_mean\n");
        for d in &self.deltas {
            writeln!(s, "{},{},{},{}", d.table, d.a, d.b, d.delta_mean).expect("string write");
        }
        s
    }

    pub fn summary_text(&self) -> String {
        let mut s = String::new();
        for (title, rows) in [("early", &self.early), ("final", &self.final_)] {
            let step = rows.first().map_or(0, |r| r.t);
            writeln!(s, "{title} performance at step {step} (mean ± std across seeds)").expect("string write");
            for r in rows {
                writeln!(s, "  {:<20} {:>10.1} ± {:<8.1} (n = {})", r.label, r.mean, r.std, r.n).expect("string write");
            }
        }
        if let Some(e) = self.expert_return {
            writeln!(s, "expert return: {e:.1}").expect("string write");
        }
        s
    }

    /// Writes `learning_curve.csv`, `table_early.csv`, `table_final.csv`,
    /// `deltas.csv`, `summary.txt` and `learning_curve.svg` into `out`.
    pub fn write(&self, out: &Path) -> Result<()> {
        std::fs::create_dir_all(out).map_err(|e| LabError::io(out, e))?;
        let files = [
            ("learning_curve.csv", self.curve_csv()),
            ("table_early.csv", Self::table_csv(&self.early)),
            ("table_final.csv", Self::table_csv(&self.final_)),
            ("deltas.csv", self.deltas_csv()),
            ("summary.txt", self.summary_text()),
            ("learning_curve.svg", crate::plot::render(self)),
        ];
        for (name, body) in files {
            write_atomic(&out.join(name), body.as_bytes())?;
        }
        Ok(())
    }
}

pub fn export_report(manifest_path: &Path, out: &Path) -> Result<Report> {
    let manifest = ExperimentManifest::load(manifest_path)?;
    let data = load_experiment(&manifest)?;
    let report = build_report(&data, &manifest)?;
    report.write(out)?;
    Ok(report)
}
