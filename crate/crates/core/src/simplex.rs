//! Euclidean projections onto the probability simplex `Δ₀` and onto the
//! lower-bounded simplex `Δ(λ_min) = {λ : Σλ = 1, λ ≥ λ_min}`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::RealVector;

/// Client weights λ.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WeightVector(RealVector);

impl WeightVector {
    pub fn new(lambda: RealVector) -> Self {
        Self(lambda)
    }

    pub fn uniform(n: usize) -> Result<Self> {
        Ok(Self(RealVector::filled(n, 1.0 / n as f64)?))
    }

    /// Weights proportional to `sizes`.
    pub fn proportional(sizes: &[usize]) -> Result<Self> {
        let total: usize = sizes.iter().sum();
        if total == 0 {
            return Err(Error::Empty("client sizes"));
        }
        Ok(Self(RealVector::new(
            sizes.iter().map(|&s| s as f64 / total as f64).collect(),
        )?))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }

    pub fn as_vector(&self) -> &RealVector {
        &self.0
    }

    /// True when `Σλ = 1` and `λ ≥ lambda_min` up to `tol`.
    pub fn is_feasible(&self, lambda_min: f64, tol: f64) -> bool {
        (self.0.sum() - 1.0).abs() <= tol && self.0.iter().all(|&l| l >= lambda_min - tol)
    }
}

/// Projection onto `Δ₀` by sort-and-threshold.
pub fn project_simplex(v: &RealVector) -> WeightVector {
    let values = v.as_slice();
    let mut order: Vec<usize> = (0..values.len()).collect();
    // Descending; ties keep the original index order.
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));

    let mut cumulative = 0.0;
    let mut tau = 0.0;
    for (k, &i) in order.iter().enumerate() {
        cumulative += values[i];
        let candidate = (cumulative - 1.0) / (k + 1) as f64;
        if values[i] - candidate > 0.0 {
            tau = candidate;
        } else {
            break;
        }
    }
    let out: Vec<f64> = values.iter().map(|&x| (x - tau).max(0.0)).collect();
    WeightVector(RealVector::new(out).expect("projection of a finite non-empty vector"))
}

/// Projection onto `Δ(λ_min)`, reduced to a simplex projection by the affine map
/// `t = (λ − λ_min 1) / (1 − n λ_min)`.
pub fn project_generalized(v: &RealVector, lambda_min: f64) -> Result<WeightVector> {
    let n = v.len() as f64;
    if !lambda_min.is_finite() || lambda_min >= 1.0 / n {
        return Err(Error::invalid(format!(
            "lambda_min must be < 1/n (got {lambda_min}, n = {})",
            v.len()
        )));
    }
    let scale = 1.0 - n * lambda_min;
    let shifted = RealVector::new(v.iter().map(|&x| (x - lambda_min) / scale).collect())?;
    let t = project_simplex(&shifted);
    let out = RealVector::new(t.as_slice().iter().map(|&x| scale * x + lambda_min).collect())?;
    Ok(WeightVector(out))
}
