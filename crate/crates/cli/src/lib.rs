//! Configuration-driven runner around `feddg-core`: single experiments,
//! parameter sweeps and post-hoc analysis tables.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analyze;
pub mod app;
pub mod config;
pub mod error;
pub mod experiment;
pub mod sweep;

pub use app::run_cli;
pub use config::{parse_json, read_json, DatasetConfig, ExperimentConfig, IdxData, SyntheticData};
pub use error::CliError;
pub use experiment::{
    prepare_data, read_results, run_experiment, run_prepared, write_outputs, ExperimentResult, PreparedData,
    HETEROGENEITY_FILE, RESOLVED_CONFIG_FILE, RESULTS_FILE, ROUNDS_FILE,
};
pub use sweep::{run_sweep, Axis, SweepConfig};
