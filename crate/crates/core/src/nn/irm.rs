//! Invariance penalty on a scalar rescaling of the parameters.
//!
//! With `f` the mean cross-entropy and `w` a scalar multiplier,
//! `g = d/dw f(w θ)|_{w=1} = <θ, ∇f(θ)>` and the penalty is `g²`. Its gradient
//! `2 g (∇f(θ) + H(θ) θ)` needs one Hessian-vector product, taken here by a
//! central difference of gradients.

use crate::error::{Error, Result};
use crate::nn::model::{loss_and_grad, Batch, ModelSpec, ParamVector};

/// Relative base step for the finite-difference Hessian-vector product.
pub const HVP_BASE_STEP: f64 = 1e-4;

fn max_abs(x: &[f64]) -> f64 {
    x.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

/// Step used along direction `v`, scaled so that `step * |v|_inf` tracks `|θ|_inf`.
pub fn hvp_step(theta: &[f64], direction: &[f64]) -> f64 {
    HVP_BASE_STEP * (1.0 + max_abs(theta)) / (1.0 + max_abs(direction))
}

/// `(∇f(θ + εv) − ∇f(θ − εv)) / 2ε` for an arbitrary gradient oracle.
pub fn finite_difference_hvp<F>(grad: F, theta: &[f64], direction: &[f64], step: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    if theta.len() != direction.len() {
        return Err(Error::dim(format!(
            "hvp: theta has {} entries, direction {}",
            theta.len(),
            direction.len()
        )));
    }
    if !(step > 0.0) {
        return Err(Error::invalid(format!("hvp step must be positive, got {step}")));
    }
    let shifted = |sign: f64| -> Vec<f64> { theta.iter().zip(direction).map(|(t, v)| t + sign * step * v).collect() };
    let plus = grad(&shifted(1.0))?;
    let minus = grad(&shifted(-1.0))?;
    if plus.len() != theta.len() || minus.len() != theta.len() {
        return Err(Error::dim("hvp: gradient oracle changed dimension"));
    }
    let inv = 0.5 / step;
    Ok(plus.iter().zip(&minus).map(|(p, m)| (p - m) * inv).collect())
}

/// Hessian-vector product of the mean cross-entropy at `theta` along `direction`.
pub fn hessian_vector_product(
    spec: &ModelSpec,
    theta: &ParamVector,
    batch: &Batch,
    direction: &ParamVector,
) -> Result<ParamVector> {
    theta.ensure_same_layout(direction)?;
    let step = hvp_step(theta.as_slice(), direction.as_slice());
    let oracle = |point: &[f64]| -> Result<Vec<f64>> {
        let p = theta.with_values(point.to_vec())?;
        Ok(loss_and_grad(spec, &p, batch)?.1.as_slice().to_vec())
    };
    let hv = finite_difference_hvp(oracle, theta.as_slice(), direction.as_slice(), step)?;
    theta.with_values(hv)
}

/// Everything one Fed-IRM local step needs from a single batch.
#[derive(Clone, Debug)]
pub struct IrmTerms {
    pub loss: f64,
    pub loss_grad: ParamVector,
    /// `<θ, ∇f(θ)>`.
    pub scale_derivative: f64,
    pub penalty: f64,
    pub penalty_grad: ParamVector,
}

pub fn irm_terms(spec: &ModelSpec, theta: &ParamVector, batch: &Batch) -> Result<IrmTerms> {
    let (loss, loss_grad) = loss_and_grad(spec, theta, batch)?;
    let g = theta.dot(&loss_grad)?;
    let hv = hessian_vector_product(spec, theta, batch, theta)?;
    let combined = loss_grad.add_scaled(1.0, &hv)?;
    let penalty_grad = theta.with_values(combined.as_slice().iter().map(|v| 2.0 * g * v).collect())?;
    penalty_grad.check("irm penalty gradient")?;
    Ok(IrmTerms {
        loss,
        loss_grad,
        scale_derivative: g,
        penalty: g * g,
        penalty_grad,
    })
}

/// Penalty `(d/dw f(wθ)|_{w=1})²` and its gradient in θ.
pub fn irm_penalty_and_grad(spec: &ModelSpec, theta: &ParamVector, batch: &Batch) -> Result<(f64, ParamVector)> {
    let terms = irm_terms(spec, theta, batch)?;
    Ok((terms.penalty, terms.penalty_grad))
}
