use std::path::Path;

use feddg_core::data::{
    dirichlet_split, load_idx_dataset, make_environments, EnvRole, Environment, Glyph, PrototypeSet,
};
use feddg_core::diagnostics::{optimality_gap_proxy, write_metric_csv, Evaluator, MetricRow, RoundRecord};
use feddg_core::rng::{tags, RngStream};
use feddg_core::strategies::{run_federation, RoundHook};
use serde::{Deserialize, Serialize};

use crate::config::{DatasetConfig, ExperimentConfig};
use crate::error::CliError;

/// Training clients, the held-out splits of each training domain and the OOD domain.
#[derive(Clone, Debug)]
pub struct PreparedData {
    pub clients: Vec<Environment>,
    pub validation: Vec<Environment>,
    pub ood: Environment,
}

fn load_bank(cfg: &ExperimentConfig, root: &RngStream) -> Result<Vec<Glyph>, CliError> {
    match &cfg.dataset {
        DatasetConfig::Synthetic(s) => {
            let set = PrototypeSet::catalog_with_width(s.num_classes, s.side, s.stroke_width)
                .map_err(|e| CliError::Config(format!("dataset: {e}")))?;
            Ok(set.sample_bank(s.samples_per_class, s.noise_std, &mut root.child(tags::GLYPHS))?)
        }
        DatasetConfig::Idx(idx) => {
            let mut rows = load_idx_dataset(&idx.images, &idx.labels)?;
            if let Some(limit) = idx.limit {
                rows.truncate(limit);
            }
            let bank = rows
                .into_iter()
                .map(|(pixels, label)| Glyph::new(pixels, label))
                .collect::<feddg_core::Result<Vec<_>>>()?;
            let side = bank.first().map_or(0, Glyph::side);
            if cfg.model.input_dim != side * side {
                return Err(CliError::Config(format!(
                    "model.input_dim: {} does not match the {side}x{side} IDX images",
                    cfg.model.input_dim
                )));
            }
            if let Some(g) = bank.iter().find(|g| g.label >= cfg.model.num_classes) {
                return Err(CliError::Config(format!(
                    "model.num_classes: {} but the IDX labels include {}",
                    cfg.model.num_classes, g.label
                )));
            }
            Ok(bank)
        }
    }
}

pub fn prepare_data(cfg: &ExperimentConfig) -> Result<PreparedData, CliError> {
    cfg.validate()?;
    let root = RngStream::new(cfg.seed, 0);
    let bank = load_bank(cfg, &root)?;
    let mut envs = make_environments(
        &bank,
        &cfg.angles_deg,
        cfg.ood_angle_deg,
        &mut root.child(tags::ENVIRONMENTS),
    )?;
    let ood = envs.pop().expect("make_environments returns the OOD environment last");
    debug_assert_eq!(ood.role, EnvRole::OodTest);
    let mut clients = Vec::new();
    let mut validation = Vec::with_capacity(envs.len());
    for env in &envs {
        let id = env.env_id as u64;
        let (train, held) = env.split_holdout(cfg.holdout_fraction, &mut root.child(tags::HOLDOUT).child(id))?;
        clients.extend(dirichlet_split(
            &train,
            &cfg.split,
            &mut root.child(tags::SPLIT).child(id),
        )?);
        validation.push(held);
    }
    Ok(PreparedData {
        clients,
        validation,
        ood,
    })
}

/// Final-round metrics, repeated at the top of `results.json` for convenience.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FinalSummary {
    pub id_accuracy: f64,
    pub ood_accuracy: f64,
    pub global_objective: f64,
    pub grad_sq_norm_mean: f64,
    pub grad_sq_norm_std: f64,
    pub optimality_gap_proxy: Option<f64>,
}

/// Contents of `results.json`. Holds no paths or timings, so equal seeds give equal bytes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentResult {
    pub strategy: String,
    pub augmentation: String,
    pub seed: u64,
    pub num_clients: usize,
    pub rounds: usize,
    pub local_steps: usize,
    pub final_summary: FinalSummary,
    pub records: Vec<RoundRecord>,
}

impl ExperimentResult {
    pub fn final_record(&self) -> &RoundRecord {
        self.records.last().expect("at least one round")
    }
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult, CliError> {
    let data = prepare_data(cfg)?;
    run_prepared(cfg, &data)
}

/// Runs the federation on already prepared data.
pub fn run_prepared(cfg: &ExperimentConfig, data: &PreparedData) -> Result<ExperimentResult, CliError> {
    let root = RngStream::new(cfg.seed, 0);
    let mut evaluator = Evaluator::new(&data.clients, &data.validation, &data.ood, cfg.eval_every_rounds)?;
    let mut hooks: [&mut dyn RoundHook; 1] = [&mut evaluator];
    let run = run_federation(
        &data.clients,
        &cfg.model,
        &cfg.strategy,
        &cfg.augmentation,
        &root,
        &mut hooks,
    )?;
    let last = run.records.last().expect("rounds >= 1");
    let report = last.grad_sq_norms.as_ref().expect("final round is evaluated");
    let final_summary = FinalSummary {
        id_accuracy: last.id_accuracy.expect("final round is evaluated"),
        ood_accuracy: last.ood_accuracy.expect("final round is evaluated"),
        global_objective: last.global_objective.expect("final round is evaluated"),
        grad_sq_norm_mean: report.mean,
        grad_sq_norm_std: report.std,
        optimality_gap_proxy: optimality_gap_proxy(&run.records),
    };
    Ok(ExperimentResult {
        strategy: cfg.strategy.kind.name().to_string(),
        augmentation: cfg.augmentation.label(),
        seed: cfg.seed,
        num_clients: data.clients.len(),
        rounds: cfg.strategy.rounds,
        local_steps: cfg.strategy.local_steps,
        final_summary,
        records: run.records,
    })
}

pub const RESULTS_FILE: &str = "results.json";
pub const ROUNDS_FILE: &str = "rounds.csv";
pub const HETEROGENEITY_FILE: &str = "heterogeneity.csv";
pub const RESOLVED_CONFIG_FILE: &str = "resolved-config.json";

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(feddg_core::Error::from)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn write_outputs(dir: &Path, cfg: &ExperimentConfig, result: &ExperimentResult) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    write_json(&dir.join(RESOLVED_CONFIG_FILE), cfg)?;
    write_json(&dir.join(RESULTS_FILE), result)?;
    let rows: Vec<MetricRow> = result.records.iter().flat_map(RoundRecord::metric_rows).collect();
    write_metric_csv(&dir.join(ROUNDS_FILE), &rows)?;
    let last = result.final_record();
    let het = last
        .grad_sq_norms
        .as_ref()
        .map(|r| r.metric_rows(last.round))
        .unwrap_or_default();
    write_metric_csv(&dir.join(HETEROGENEITY_FILE), &het)?;
    Ok(())
}

pub fn read_results(dir: &Path) -> Result<ExperimentResult, CliError> {
    let path = dir.join(RESULTS_FILE);
    let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Runtime(feddg_core::Error::InvalidArgument(format!("{}: {e}", path.display()))))
}
