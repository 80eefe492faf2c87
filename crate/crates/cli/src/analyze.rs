use std::path::{Path, PathBuf};

use feddg_core::diagnostics::{gap_report, mean_and_std, GapPoint};

use crate::error::CliError;
use crate::experiment::{read_results, ExperimentResult, RESULTS_FILE};

/// Results of a run directory, or of every point of a sweep directory in point order.
pub fn collect_runs(dir: &Path) -> Result<Vec<ExperimentResult>, CliError> {
    if dir.join(RESULTS_FILE).is_file() {
        return Ok(vec![read_results(dir)?]);
    }
    let entries = std::fs::read_dir(dir).map_err(|e| CliError::io(dir, e))?;
    let mut points: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join(RESULTS_FILE).is_file())
        .collect();
    points.sort();
    if points.is_empty() {
        return Err(CliError::Runtime(feddg_core::Error::InvalidArgument(format!(
            "{}: no {RESULTS_FILE} found in the directory or its subdirectories",
            dir.display()
        ))));
    }
    points.iter().map(|p| read_results(p)).collect()
}

/// Runs sharing strategy, augmentation and round schedule, averaged over seeds.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupRow {
    pub strategy: String,
    pub augmentation: String,
    pub rounds: usize,
    pub local_steps: usize,
    pub runs: usize,
    pub ood_accuracy_mean: f64,
    pub ood_accuracy_sd: f64,
    pub id_accuracy_mean: f64,
    pub grad_sq_norm_mean: f64,
    pub grad_sq_norm_sd: f64,
}

pub fn group_runs(runs: &[ExperimentResult]) -> Result<Vec<GroupRow>, CliError> {
    let key = |r: &ExperimentResult| (r.strategy.clone(), r.augmentation.clone(), r.rounds, r.local_steps);
    let mut keys = Vec::new();
    for r in runs {
        if !keys.contains(&key(r)) {
            keys.push(key(r));
        }
    }
    keys.into_iter()
        .map(|k| {
            let members: Vec<&ExperimentResult> = runs.iter().filter(|r| key(r) == k).collect();
            let column = |f: fn(&ExperimentResult) -> f64| members.iter().map(|r| f(r)).collect::<Vec<_>>();
            let (ood_mean, ood_sd) = mean_and_std(&column(|r| r.final_summary.ood_accuracy))?;
            let (id_mean, _) = mean_and_std(&column(|r| r.final_summary.id_accuracy))?;
            let (g_mean, g_sd) = mean_and_std(&column(|r| r.final_summary.grad_sq_norm_mean))?;
            Ok(GroupRow {
                strategy: k.0,
                augmentation: k.1,
                rounds: k.2,
                local_steps: k.3,
                runs: members.len(),
                ood_accuracy_mean: ood_mean,
                ood_accuracy_sd: ood_sd,
                id_accuracy_mean: id_mean,
                grad_sq_norm_mean: g_mean,
                grad_sq_norm_sd: g_sd,
            })
        })
        .collect()
}

fn to_csv(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(feddg_core::Error::from)?;
    for row in rows {
        w.write_record(&row).map_err(feddg_core::Error::from)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| CliError::Runtime(feddg_core::Error::InvalidArgument(e.to_string())))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn schedule(r: &GroupRow) -> Vec<String> {
    vec![
        r.strategy.clone(),
        r.augmentation.clone(),
        r.rounds.to_string(),
        r.local_steps.to_string(),
        r.runs.to_string(),
    ]
}

pub const OOD_TABLE_FILE: &str = "ood_vs_augmentation.csv";
pub const HETEROGENEITY_TABLE_FILE: &str = "heterogeneity_vs_augmentation.csv";
pub const GAP_TABLE_FILE: &str = "gap.csv";

pub fn ood_table(rows: &[GroupRow]) -> Result<String, CliError> {
    to_csv(
        &[
            "strategy",
            "augmentation",
            "rounds",
            "local_steps",
            "runs",
            "ood_accuracy_mean",
            "ood_accuracy_sd",
            "id_accuracy_mean",
        ],
        rows.iter().map(|r| {
            let mut row = schedule(r);
            row.extend([r.ood_accuracy_mean, r.ood_accuracy_sd, r.id_accuracy_mean].map(|v| v.to_string()));
            row
        }),
    )
}

pub fn heterogeneity_table(rows: &[GroupRow]) -> Result<String, CliError> {
    to_csv(
        &[
            "strategy",
            "augmentation",
            "rounds",
            "local_steps",
            "runs",
            "grad_sq_norm_mean",
            "grad_sq_norm_sd",
        ],
        rows.iter().map(|r| {
            let mut row = schedule(r);
            row.extend([r.grad_sq_norm_mean, r.grad_sq_norm_sd].map(|v| v.to_string()));
            row
        }),
    )
}

/// Centralized minus federated OOD accuracy at matched gradient steps.
pub fn gap_table(
    federated: &ExperimentResult,
    centralized: &ExperimentResult,
) -> Result<(Vec<GapPoint>, String), CliError> {
    let points = gap_report(&federated.records, &centralized.records)?;
    let text = to_csv(
        &["gradient_steps", "centralized_ood", "federated_ood", "gap"],
        points.iter().map(|p| {
            vec![
                p.gradient_steps.to_string(),
                p.centralized_ood.to_string(),
                p.federated_ood.to_string(),
                p.gap.to_string(),
            ]
        }),
    )?;
    Ok((points, text))
}
