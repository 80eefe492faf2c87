use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::diagnostics::heterogeneity::HeterogeneityReport;
use crate::error::{Error, Result};
use crate::simplex::WeightVector;

/// Metrics of one communication round. Evaluation fields are `None` on rounds
/// that were not evaluated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoundRecord {
    /// 1-based.
    pub round: usize,
    /// Gradient steps each client has taken so far.
    pub gradient_steps: usize,
    /// Mean accuracy over the held-out splits of the training environments.
    pub id_accuracy: Option<f64>,
    pub ood_accuracy: Option<f64>,
    /// Size-weighted mean training loss `F(θ)` of the global model.
    pub global_objective: Option<f64>,
    /// Smallest `F` reached by any client's local model (final round only).
    pub best_local_objective: Option<f64>,
    pub per_client_loss: Vec<f64>,
    /// Client weights after this round's update.
    pub lambda: WeightVector,
    pub grad_sq_norms: Option<HeterogeneityReport>,
}

impl RoundRecord {
    pub fn new(round: usize, gradient_steps: usize, per_client_loss: Vec<f64>, lambda: WeightVector) -> Self {
        Self {
            round,
            gradient_steps,
            id_accuracy: None,
            ood_accuracy: None,
            global_objective: None,
            best_local_objective: None,
            per_client_loss,
            lambda,
            grad_sq_norms: None,
        }
    }

    /// Flat rows: client losses and λ per client, then any evaluated scalars.
    pub fn metric_rows(&self) -> Vec<MetricRow> {
        let mut rows = Vec::new();
        for (i, &loss) in self.per_client_loss.iter().enumerate() {
            rows.push(MetricRow::new(self.round, Some(i), "client_loss", loss));
        }
        for (i, &l) in self.lambda.as_slice().iter().enumerate() {
            rows.push(MetricRow::new(self.round, Some(i), "lambda", l));
        }
        let scalars = [
            ("id_accuracy", self.id_accuracy),
            ("ood_accuracy", self.ood_accuracy),
            ("global_objective", self.global_objective),
            ("best_local_objective", self.best_local_objective),
        ];
        for (name, value) in scalars {
            if let Some(v) = value {
                rows.push(MetricRow::new(self.round, None, name, v));
            }
        }
        rows
    }
}

impl HeterogeneityReport {
    pub fn metric_rows(&self, round: usize) -> Vec<MetricRow> {
        let mut rows: Vec<MetricRow> = self
            .env_ids
            .iter()
            .zip(&self.per_env_grad_sq_norm)
            .map(|(&id, &v)| MetricRow::new(round, Some(id), "grad_sq_norm", v))
            .collect();
        rows.push(MetricRow::new(round, None, "grad_sq_norm_mean", self.mean));
        rows.push(MetricRow::new(round, None, "grad_sq_norm_std", self.std));
        rows
    }
}

/// Header of every metric CSV.
pub const METRIC_COLUMNS: [&str; 4] = ["round", "env_id", "metric", "value"];

/// One CSV row; `env_id` is empty for metrics that are not per environment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub round: usize,
    pub env_id: Option<usize>,
    pub metric: String,
    pub value: f64,
}

impl MetricRow {
    pub fn new(round: usize, env_id: Option<usize>, metric: &str, value: f64) -> Self {
        Self {
            round,
            env_id,
            metric: metric.to_string(),
            value,
        }
    }
}

pub fn write_metric_csv(path: &Path, rows: &[MetricRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(METRIC_COLUMNS)?;
    for row in rows {
        w.write_record([
            row.round.to_string(),
            row.env_id.map(|e| e.to_string()).unwrap_or_default(),
            row.metric.clone(),
            row.value.to_string(),
        ])?;
    }
    w.flush().map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn read_metric_csv(path: &Path) -> Result<Vec<MetricRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != METRIC_COLUMNS {
        return Err(Error::invalid(format!(
            "{}: unexpected header {header:?}",
            path.display()
        )));
    }
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

/// `F(θ_final) − min F` over every evaluated global model and the final local models.
pub fn optimality_gap_proxy(records: &[RoundRecord]) -> Option<f64> {
    let last = records.iter().rev().find_map(|r| r.global_objective)?;
    let best = records
        .iter()
        .flat_map(|r| [r.global_objective, r.best_local_objective])
        .flatten()
        .fold(f64::INFINITY, f64::min);
    Some(last - best)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapPoint {
    pub gradient_steps: usize,
    pub centralized_ood: f64,
    pub federated_ood: f64,
    /// Centralized minus federated OOD accuracy.
    pub gap: f64,
}

/// OOD gap at every gradient-step count evaluated in both runs. Both runs must
/// spend the same total budget.
pub fn gap_report(federated: &[RoundRecord], centralized: &[RoundRecord]) -> Result<Vec<GapPoint>> {
    let (Some(f_last), Some(c_last)) = (federated.last(), centralized.last()) else {
        return Err(Error::Empty("round records"));
    };
    if f_last.gradient_steps != c_last.gradient_steps {
        return Err(Error::invalid(format!(
            "misaligned budgets: federated run ends at {} gradient steps, centralized at {}",
            f_last.gradient_steps, c_last.gradient_steps
        )));
    }
    let points: Vec<GapPoint> = federated
        .iter()
        .filter_map(|f| {
            let fed = f.ood_accuracy?;
            let cen = centralized
                .iter()
                .find(|c| c.gradient_steps == f.gradient_steps)?
                .ood_accuracy?;
            Some(GapPoint {
                gradient_steps: f.gradient_steps,
                centralized_ood: cen,
                federated_ood: fed,
                gap: cen - fed,
            })
        })
        .collect();
    if points.is_empty() {
        return Err(Error::invalid(
            "misaligned budgets: no gradient-step count evaluated in both runs",
        ));
    }
    Ok(points)
}
