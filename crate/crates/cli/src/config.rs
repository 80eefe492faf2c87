use std::path::{Path, PathBuf};

use feddg_core::data::{AugmentationSpec, SplitSpec, STROKE_WIDTH};
use feddg_core::nn::ModelSpec;
use feddg_core::strategies::{StrategyConfig, StrategyKind};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticData {
    pub num_classes: usize,
    /// Image side in pixels.
    pub side: usize,
    pub samples_per_class: usize,
    pub noise_std: f64,
    pub stroke_width: f64,
}

impl Default for SyntheticData {
    fn default() -> Self {
        Self {
            num_classes: 10,
            side: 16,
            samples_per_class: 300,
            noise_std: 0.2,
            stroke_width: STROKE_WIDTH,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdxData {
    pub images: PathBuf,
    pub labels: PathBuf,
    /// Use only the first `limit` images.
    #[serde(default)]
    pub limit: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetConfig {
    Synthetic(SyntheticData),
    Idx(IdxData),
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig::Synthetic(SyntheticData::default())
    }
}

fn default_model() -> ModelSpec {
    ModelSpec::new(256, vec![64], 10).expect("valid default model")
}

/// Everything needed to reproduce one run. Missing fields take their defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub dataset: DatasetConfig,
    pub angles_deg: Vec<f64>,
    pub ood_angle_deg: f64,
    /// Share of each training environment held out for validation.
    pub holdout_fraction: f64,
    pub split: SplitSpec,
    pub augmentation: AugmentationSpec,
    pub strategy: StrategyConfig,
    #[serde(default = "default_model")]
    pub model: ModelSpec,
    pub eval_every_rounds: usize,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            dataset: DatasetConfig::default(),
            angles_deg: vec![0.0, 15.0, 30.0, 45.0, 60.0],
            ood_angle_deg: 75.0,
            holdout_fraction: 0.1,
            split: SplitSpec::default(),
            augmentation: AugmentationSpec::default(),
            strategy: StrategyConfig::default(),
            model: default_model(),
            eval_every_rounds: 1,
            output_dir: PathBuf::from("results"),
        }
    }
}

impl ExperimentConfig {
    pub fn num_clients(&self) -> usize {
        self.angles_deg.len() * self.split.num_clients_per_domain
    }

    /// Checks every field that can be checked without loading data.
    pub fn validate(&self) -> Result<(), CliError> {
        let field = |name: &str, e: feddg_core::Error| CliError::Config(format!("{name}: {e}"));
        if self.eval_every_rounds == 0 {
            return Err(CliError::Config("eval_every_rounds: must be >= 1".into()));
        }
        if self.angles_deg.is_empty() {
            return Err(CliError::Config(
                "angles_deg: at least one training angle is required".into(),
            ));
        }
        if self
            .angles_deg
            .iter()
            .chain([&self.ood_angle_deg])
            .any(|a| !a.is_finite())
        {
            return Err(CliError::Config("angles_deg: angles must be finite".into()));
        }
        if !(self.holdout_fraction > 0.0 && self.holdout_fraction < 1.0) {
            return Err(CliError::Config(format!(
                "holdout_fraction: must be in (0, 1), got {}",
                self.holdout_fraction
            )));
        }
        self.split.validate().map_err(|e| field("split", e))?;
        self.augmentation.validate().map_err(|e| field("augmentation", e))?;
        let n = if self.strategy.kind == StrategyKind::Centralized {
            1
        } else {
            self.num_clients()
        };
        self.strategy.validate(n).map_err(|e| field("strategy", e))?;
        self.model.validate().map_err(|e| field("model", e))?;
        if let DatasetConfig::Synthetic(s) = &self.dataset {
            if self.model.input_dim != s.side * s.side {
                return Err(CliError::Config(format!(
                    "model.input_dim: {} does not match dataset.side² = {}",
                    self.model.input_dim,
                    s.side * s.side
                )));
            }
            if self.model.num_classes != s.num_classes {
                return Err(CliError::Config(format!(
                    "model.num_classes: {} does not match dataset.num_classes = {}",
                    self.model.num_classes, s.num_classes
                )));
            }
            if !(s.noise_std >= 0.0) {
                return Err(CliError::Config("dataset.noise_std: must be >= 0".into()));
            }
        }
        Ok(())
    }
}

/// Reads a JSON document; parse errors name the offending field path.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_json(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

pub fn parse_json<T: DeserializeOwned>(text: &str) -> Result<T, String> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        if path == "." {
            e.inner().to_string()
        } else {
            format!("{path}: {}", e.inner())
        }
    })
}
