use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Environment;
use crate::error::{Error, Result};
use crate::nn::{loss_and_grad, ModelSpec, ParamVector};

/// Squared full-batch gradient norms `‖∇f_i(θ)‖²` across environments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeterogeneityReport {
    pub env_ids: Vec<usize>,
    pub per_env_grad_sq_norm: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation (n − 1 denominator); 0 for a single environment.
    pub std: f64,
    pub evaluated_at: String,
}

/// Mean and sample standard deviation, summed in sorted order so the result
/// does not depend on the order of `values`.
pub fn mean_and_std(values: &[f64]) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(Error::Empty("values"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mean = sorted.iter().sum::<f64>() / n;
    if sorted.len() == 1 {
        return Ok((mean, 0.0));
    }
    let mut dev: Vec<f64> = sorted.iter().map(|v| (v - mean) * (v - mean)).collect();
    dev.sort_by(f64::total_cmp);
    Ok((mean, (dev.iter().sum::<f64>() / (n - 1.0)).sqrt()))
}

/// Evaluates `‖∇f_i(θ)‖²` on each environment's full (unaugmented) data.
pub fn heterogeneity(
    envs: &[Environment],
    theta: &ParamVector,
    spec: &ModelSpec,
    evaluated_at: &str,
) -> Result<HeterogeneityReport> {
    if envs.is_empty() {
        return Err(Error::Empty("evaluation environments"));
    }
    let per_env_grad_sq_norm = envs
        .par_iter()
        .map(|env| {
            let batch = env.to_batch()?;
            Ok(loss_and_grad(spec, theta, &batch)?.1.squared_norm())
        })
        .collect::<Result<Vec<f64>>>()?;
    let (mean, std) = mean_and_std(&per_env_grad_sq_norm)?;
    Ok(HeterogeneityReport {
        env_ids: envs.iter().map(|e| e.env_id).collect(),
        per_env_grad_sq_norm,
        mean,
        std,
        evaluated_at: evaluated_at.to_string(),
    })
}
