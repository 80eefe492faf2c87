use crate::error::{Error, Result};
use crate::linalg::RealVector;
use crate::nn::ParamVector;
use crate::simplex::{project_generalized, WeightVector};
use crate::strategies::config::StrategyConfig;
use crate::strategies::local::LocalUpdate;

/// `Σ w_i x_i`, accumulated in index order.
fn weighted_sum<'a>(items: impl Iterator<Item = (&'a ParamVector, f64)>) -> Result<ParamVector> {
    let mut acc: Option<(ParamVector, Vec<f64>)> = None;
    for (x, w) in items {
        let (first, sum) = acc.get_or_insert_with(|| (x.clone(), vec![0.0; x.len()]));
        first.ensure_same_layout(x)?;
        for (s, v) in sum.iter_mut().zip(x.as_slice()) {
            *s += w * v;
        }
    }
    let (first, sum) = acc.ok_or(Error::Empty("updates"))?;
    first.with_values(sum)
}

fn check_lengths(updates: &[LocalUpdate], weights: usize) -> Result<()> {
    if updates.is_empty() {
        return Err(Error::Empty("updates"));
    }
    if updates.len() != weights {
        return Err(Error::dim(format!("{} updates but {weights} weights", updates.len())));
    }
    Ok(())
}

/// `Σ (n_i/N) θ_i`. The weights must sum to one within 1e-12.
pub fn aggregate_fedavg(updates: &[LocalUpdate], weights: &[f64]) -> Result<ParamVector> {
    check_lengths(updates, weights.len())?;
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::invalid(format!("aggregation weights sum to {total}, not 1")));
    }
    weighted_sum(updates.iter().map(|u| &u.theta_after).zip(weights.iter().copied()))
}

/// `Σ λ_i θ_i`; λ may contain negative entries.
pub fn aggregate_weighted(updates: &[LocalUpdate], lambda: &WeightVector) -> Result<ParamVector> {
    check_lengths(updates, lambda.len())?;
    weighted_sum(
        updates
            .iter()
            .map(|u| &u.theta_after)
            .zip(lambda.as_slice().iter().copied()),
    )
}

/// Variance-penalised pseudo-gradient
/// `Σ λ_i Δ_i + 2β Σ λ_i (f_i − f̄)(Δ_i − Δ̄)` with `f̄ = Σ λ_i f_i` and `Δ̄ = Σ λ_i Δ_i`.
/// The new global model is `θ_t − Δ_t`.
pub fn aggregate_vm(updates: &[LocalUpdate], losses: &[f64], lambda: &WeightVector, beta: f64) -> Result<ParamVector> {
    check_lengths(updates, lambda.len())?;
    if losses.len() != updates.len() {
        return Err(Error::dim(format!(
            "{} updates but {} losses",
            updates.len(),
            losses.len()
        )));
    }
    let w = lambda.as_slice();
    let mean_delta = weighted_sum(updates.iter().map(|u| &u.pseudo_gradient).zip(w.iter().copied()))?;
    let mean_loss: f64 = w.iter().zip(losses).map(|(l, f)| l * f).sum();
    let mut out = mean_delta.as_slice().to_vec();
    for ((u, &l), &f) in updates.iter().zip(w).zip(losses) {
        let coeff = 2.0 * beta * l * (f - mean_loss);
        for ((o, d), m) in out
            .iter_mut()
            .zip(u.pseudo_gradient.as_slice())
            .zip(mean_delta.as_slice())
        {
            *o += coeff * (d - m);
        }
    }
    mean_delta.with_values(out)
}

/// Projected ascent on λ over `Δ(λ_min)`:
/// `λ' = (λ + η_λ f − λ_min 1)/(1 − nλ_min)`, then `λ = (1 − nλ_min) proj_Δ(λ') + λ_min 1`.
pub fn update_lambda_gen_afl(lambda: &WeightVector, losses: &[f64], cfg: &StrategyConfig) -> Result<WeightVector> {
    ascend(lambda, losses, cfg.lr_lambda, cfg.lambda_min)
}

/// [`update_lambda_gen_afl`] on the plain simplex (`λ_min = 0`).
pub fn update_lambda_afl(lambda: &WeightVector, losses: &[f64], cfg: &StrategyConfig) -> Result<WeightVector> {
    ascend(lambda, losses, cfg.lr_lambda, 0.0)
}

fn ascend(lambda: &WeightVector, losses: &[f64], lr: f64, lambda_min: f64) -> Result<WeightVector> {
    if losses.len() != lambda.len() {
        return Err(Error::dim(format!(
            "{} weights but {} losses",
            lambda.len(),
            losses.len()
        )));
    }
    let stepped = RealVector::new(lambda.as_slice().iter().zip(losses).map(|(l, f)| l + lr * f).collect())?;
    project_generalized(&stepped, lambda_min)
}
