//! Measurements taken on a federation: gradient-norm heterogeneity, total
//! variation between angle distributions, per-round records and the
//! centralized-vs-federated gap.

mod evaluate;
mod heterogeneity;
mod records;
mod tv;

pub use evaluate::Evaluator;
pub use heterogeneity::{heterogeneity, mean_and_std, HeterogeneityReport};
pub use records::{
    gap_report, optimality_gap_proxy, read_metric_csv, write_metric_csv, GapPoint, MetricRow, RoundRecord,
    METRIC_COLUMNS,
};
pub use tv::{trapezoid, tv_analytic, tv_numeric, tv_numeric_2d, tv_uniform_numeric, Grid, TvQuery};
