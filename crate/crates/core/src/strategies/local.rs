use crate::data::{AugmentationSpec, Environment};
use crate::error::{Error, Result};
use crate::nn::{irm_terms, loss_and_grad, Batch, ModelSpec, OptimizerState, ParamVector};
use crate::rng::{tags, RngStream};
use crate::strategies::config::{StrategyConfig, StrategyKind};

/// Result of one client's local training in one round.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalUpdate {
    pub client_id: usize,
    pub theta_after: ParamVector,
    /// `theta_start - theta_after`.
    pub pseudo_gradient: ParamVector,
    /// Mean data loss over the local steps of this round.
    pub train_loss: f64,
}

/// Stream owned by `client` during `round` (0-based).
pub fn client_stream(root: &RngStream, round: usize, client: usize) -> RngStream {
    root.child(tags::TRAIN).child(round as u64).child(client as u64)
}

/// `batch_size` indices drawn uniformly with replacement from `0..n`.
pub fn sample_batch(n: usize, batch_size: usize, rng: &mut RngStream) -> Vec<usize> {
    (0..batch_size).map(|_| rng.next_index(n)).collect()
}

/// Local objective gradient for one mini-batch; returns (data loss, gradient).
fn step_gradient(
    spec: &ModelSpec,
    cfg: &StrategyConfig,
    theta: &ParamVector,
    theta_start: &ParamVector,
    batch: &Batch,
) -> Result<(f64, ParamVector)> {
    match cfg.kind {
        StrategyKind::FedIrm => {
            let terms = irm_terms(spec, theta, batch)?;
            Ok((terms.loss, terms.loss_grad.add_scaled(cfg.beta, &terms.penalty_grad)?))
        }
        StrategyKind::Fedprox => {
            let (loss, grad) = loss_and_grad(spec, theta, batch)?;
            let drift = theta.sub(theta_start)?;
            Ok((loss, grad.add_scaled(cfg.mu, &drift)?))
        }
        _ => loss_and_grad(spec, theta, batch),
    }
}

/// Runs `cfg.local_steps` optimizer steps from `theta_start`, continuing from `optimizer`.
#[allow(clippy::too_many_arguments)]
pub fn local_train_with(
    client_id: usize,
    client: &Environment,
    theta_start: &ParamVector,
    spec: &ModelSpec,
    cfg: &StrategyConfig,
    aug: &AugmentationSpec,
    rng: &mut RngStream,
    mut optimizer: OptimizerState,
) -> Result<(LocalUpdate, OptimizerState)> {
    if client.is_empty() {
        return Err(Error::Empty("client dataset"));
    }
    let mut theta = theta_start.clone();
    let mut loss_sum = 0.0;
    for _ in 0..cfg.local_steps {
        let idx = sample_batch(client.len(), cfg.batch_size, rng);
        let batch = client.batch(&idx, aug, rng)?;
        let (loss, grad) = step_gradient(spec, cfg, &theta, theta_start, &batch)?;
        loss_sum += loss;
        optimizer.step(&mut theta, &grad)?;
    }
    let pseudo_gradient = theta_start.sub(&theta)?;
    Ok((
        LocalUpdate {
            client_id,
            theta_after: theta,
            pseudo_gradient,
            train_loss: loss_sum / cfg.local_steps as f64,
        },
        optimizer,
    ))
}

/// Local training with a fresh optimizer.
pub fn local_train(
    client_id: usize,
    client: &Environment,
    theta_start: &ParamVector,
    spec: &ModelSpec,
    cfg: &StrategyConfig,
    aug: &AugmentationSpec,
    rng: &mut RngStream,
) -> Result<LocalUpdate> {
    let optimizer = OptimizerState::new(cfg.optimizer, cfg.lr_theta, theta_start.len());
    local_train_with(client_id, client, theta_start, spec, cfg, aug, rng, optimizer).map(|(u, _)| u)
}
