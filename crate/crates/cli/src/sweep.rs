use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::{parse_json, ExperimentConfig};
use crate::error::CliError;
use crate::experiment::{run_experiment, write_outputs, ExperimentResult};

/// One swept field: a dotted path into the experiment config and its values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub path: String,
    pub values: Vec<Value>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default)]
    pub base: ExperimentConfig,
    pub axes: Vec<Axis>,
    /// Keep `rounds × local_steps` at this many gradient steps per client by
    /// setting `rounds = fixed_budget / local_steps` at every point.
    #[serde(default)]
    pub fixed_budget: Option<usize>,
    #[serde(default = "default_max_points")]
    pub max_points: usize,
}

fn default_max_points() -> usize {
    512
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepPoint {
    pub index: usize,
    pub assignments: Vec<(String, Value)>,
    pub config: ExperimentConfig,
}

fn set_path(root: &mut Value, path: &str, value: Value) -> Result<(), CliError> {
    let mut parts: Vec<&str> = path.split('.').collect();
    let last = parts
        .pop()
        .filter(|p| !p.is_empty())
        .ok_or_else(|| CliError::Config(format!("axes: empty path {path:?}")))?;
    let mut node = root;
    for part in parts {
        node = node
            .get_mut(part)
            .ok_or_else(|| CliError::Config(format!("axes: {path}: no field {part:?}")))?;
    }
    match node {
        Value::Object(map) => {
            map.insert(last.to_string(), value);
            Ok(())
        }
        _ => Err(CliError::Config(format!("axes: {path}: parent is not an object"))),
    }
}

impl SweepConfig {
    /// Cartesian product of the axes, first axis varying slowest.
    pub fn expand(&self) -> Result<Vec<SweepPoint>, CliError> {
        if self.axes.is_empty() {
            return Err(CliError::Config("axes: at least one axis is required".into()));
        }
        if let Some(axis) = self.axes.iter().find(|a| a.values.is_empty()) {
            return Err(CliError::Config(format!("axes: {} has no values", axis.path)));
        }
        let total = self
            .axes
            .iter()
            .try_fold(1usize, |acc, a| acc.checked_mul(a.values.len()));
        match total {
            Some(t) if t <= self.max_points => {}
            _ => {
                return Err(CliError::Config(format!(
                    "axes: the grid exceeds max_points = {}",
                    self.max_points
                )))
            }
        }
        let base = serde_json::to_value(&self.base).map_err(feddg_core::Error::from)?;
        let mut points = Vec::new();
        let mut counters = vec![0usize; self.axes.len()];
        loop {
            let assignments: Vec<(String, Value)> = self
                .axes
                .iter()
                .zip(&counters)
                .map(|(a, &i)| (a.path.clone(), a.values[i].clone()))
                .collect();
            let mut doc = base.clone();
            for (path, value) in &assignments {
                set_path(&mut doc, path, value.clone())?;
            }
            let mut config: ExperimentConfig =
                parse_json(&doc.to_string()).map_err(|e| CliError::Config(format!("point {}: {e}", points.len())))?;
            if let Some(budget) = self.fixed_budget {
                let e = config.strategy.local_steps;
                if budget % e != 0 || budget < e {
                    return Err(CliError::Config(format!(
                        "fixed_budget: {budget} is not a positive multiple of local_steps = {e}"
                    )));
                }
                config.strategy.rounds = budget / e;
            }
            points.push(SweepPoint {
                index: points.len(),
                assignments,
                config,
            });

            let mut k = self.axes.len();
            loop {
                if k == 0 {
                    return Ok(points);
                }
                k -= 1;
                counters[k] += 1;
                if counters[k] < self.axes[k].values.len() {
                    break;
                }
                counters[k] = 0;
            }
        }
    }
}

pub const SUMMARY_FILE: &str = "summary.csv";

pub fn point_dir(out: &Path, index: usize) -> PathBuf {
    out.join(format!("point-{index:03}"))
}

fn render_value(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

pub struct SweepOutcome {
    pub results: Vec<Result<ExperimentResult, String>>,
}

impl SweepOutcome {
    pub fn failures(&self) -> usize {
        self.results.iter().filter(|r| r.is_err()).count()
    }
}

/// Runs every point in order, writing each into `point-NNN/` under `out` and a
/// `summary.csv` with one row per point. Failing points are recorded and skipped.
pub fn run_sweep(sweep: &SweepConfig, out: &Path) -> Result<SweepOutcome, CliError> {
    let points = sweep.expand()?;
    std::fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    let mut results = Vec::with_capacity(points.len());
    for point in &points {
        let dir = point_dir(out, point.index);
        let mut cfg = point.config.clone();
        cfg.output_dir = dir.clone();
        let outcome = run_experiment(&cfg).and_then(|r| write_outputs(&dir, &cfg, &r).map(|_| r));
        results.push(outcome.map_err(|e| e.to_string()));
    }
    write_summary(&out.join(SUMMARY_FILE), sweep, &points, &results)?;
    Ok(SweepOutcome { results })
}

fn write_summary(
    path: &Path,
    sweep: &SweepConfig,
    points: &[SweepPoint],
    results: &[Result<ExperimentResult, String>],
) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(feddg_core::Error::from)?;
    let mut header = vec!["point".to_string()];
    header.extend(sweep.axes.iter().map(|a| a.path.clone()));
    header.extend(
        [
            "rounds",
            "local_steps",
            "status",
            "id_accuracy",
            "ood_accuracy",
            "grad_sq_norm_mean",
            "grad_sq_norm_std",
            "error",
        ]
        .map(String::from),
    );
    w.write_record(&header).map_err(feddg_core::Error::from)?;
    for (point, result) in points.iter().zip(results) {
        let mut row = vec![point.index.to_string()];
        row.extend(point.assignments.iter().map(|(_, v)| render_value(v)));
        row.push(point.config.strategy.rounds.to_string());
        row.push(point.config.strategy.local_steps.to_string());
        match result {
            Ok(r) => {
                let s = &r.final_summary;
                row.push("ok".into());
                for v in [s.id_accuracy, s.ood_accuracy, s.grad_sq_norm_mean, s.grad_sq_norm_std] {
                    row.push(v.to_string());
                }
                row.push(String::new());
            }
            Err(e) => {
                row.push("failed".into());
                row.extend(std::iter::repeat_n(String::new(), 4));
                row.push(e.clone());
            }
        }
        w.write_record(&row).map_err(feddg_core::Error::from)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}
