use rayon::prelude::*;

use crate::data::{AugmentationSpec, Environment};
use crate::diagnostics::RoundRecord;
use crate::error::{Error, Result};
use crate::nn::{ModelSpec, OptimizerState, ParamVector};
use crate::rng::{tags, RngStream};
use crate::simplex::{project_generalized, WeightVector};
use crate::strategies::aggregate::{
    aggregate_fedavg, aggregate_vm, aggregate_weighted, update_lambda_afl, update_lambda_gen_afl,
};
use crate::strategies::config::{StrategyConfig, StrategyKind};
use crate::strategies::local::{client_stream, local_train_with, LocalUpdate};

/// Server-side state between rounds.
#[derive(Clone, Debug, PartialEq)]
pub struct FederationState {
    pub global_theta: ParamVector,
    pub lambda: WeightVector,
    /// Rounds completed so far.
    pub round: usize,
    /// Optimizer state each client ended its last round with. Only the
    /// centralized baseline carries it into the next round.
    pub per_client_optimizer: Vec<OptimizerState>,
}

/// What a hook sees after a round has been aggregated.
pub struct RoundContext<'a> {
    pub spec: &'a ModelSpec,
    pub cfg: &'a StrategyConfig,
    pub theta: &'a ParamVector,
    pub updates: &'a [LocalUpdate],
    pub is_final: bool,
}

/// Per-round callback that may fill in evaluation fields of the record.
pub trait RoundHook {
    fn on_round(&mut self, ctx: &RoundContext<'_>, record: &mut RoundRecord) -> Result<()>;
}

#[derive(Clone, Debug, PartialEq)]
pub struct FederationRun {
    pub records: Vec<RoundRecord>,
    pub final_theta: ParamVector,
    pub final_lambda: WeightVector,
}

/// Initial global model, drawn from the `INIT` child of `root`.
pub fn initial_theta(spec: &ModelSpec, root: &RngStream) -> Result<ParamVector> {
    ParamVector::init(spec, &mut root.child(tags::INIT))
}

/// Client weights `n_i / N`.
pub fn client_weights(clients: &[Environment]) -> Result<WeightVector> {
    WeightVector::proportional(&clients.iter().map(Environment::len).collect::<Vec<_>>())
}

fn initial_lambda(clients: &[Environment], cfg: &StrategyConfig) -> Result<WeightVector> {
    let weights = client_weights(clients)?;
    match cfg.kind {
        StrategyKind::Afl => project_generalized(weights.as_vector(), 0.0),
        StrategyKind::GenAfl => project_generalized(weights.as_vector(), cfg.lambda_min),
        _ => Ok(weights),
    }
}

/// State before the first round. `clients` are the participating datasets
/// (a single merged dataset for the centralized baseline).
pub fn initial_state(
    clients: &[Environment],
    spec: &ModelSpec,
    cfg: &StrategyConfig,
    root: &RngStream,
) -> Result<FederationState> {
    cfg.validate(clients.len())?;
    spec.validate()?;
    if let Some(c) = clients.iter().find(|c| c.input_dim() != spec.input_dim) {
        return Err(Error::dim(format!(
            "client {} has {} inputs, model expects {}",
            c.env_id,
            c.input_dim(),
            spec.input_dim
        )));
    }
    let global_theta = initial_theta(spec, root)?;
    let per_client_optimizer = clients
        .iter()
        .map(|_| OptimizerState::new(cfg.optimizer, cfg.lr_theta, global_theta.len()))
        .collect();
    Ok(FederationState {
        global_theta,
        lambda: initial_lambda(clients, cfg)?,
        round: 0,
        per_client_optimizer,
    })
}

/// One broadcast / local-train / aggregate cycle.
pub fn run_round(
    state: &FederationState,
    clients: &[Environment],
    spec: &ModelSpec,
    cfg: &StrategyConfig,
    aug: &AugmentationSpec,
    root: &RngStream,
) -> Result<(FederationState, Vec<LocalUpdate>, RoundRecord)> {
    let round = state.round;
    let theta = &state.global_theta;
    let carry = cfg.kind == StrategyKind::Centralized;
    let results: Vec<(LocalUpdate, OptimizerState)> = clients
        .par_iter()
        .enumerate()
        .map(|(i, client)| {
            let optimizer = if carry {
                state.per_client_optimizer[i].clone()
            } else {
                OptimizerState::new(cfg.optimizer, cfg.lr_theta, theta.len())
            };
            let mut rng = client_stream(root, round, i);
            local_train_with(i, client, theta, spec, cfg, aug, &mut rng, optimizer).map_err(|e| Error::InRound {
                round: round + 1,
                client: i,
                source: Box::new(e),
            })
        })
        .collect::<Result<_>>()?;
    let (updates, optimizers): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    let losses: Vec<f64> = updates.iter().map(|u| u.train_loss).collect();

    let (global_theta, lambda) = match cfg.kind {
        StrategyKind::Afl => (
            aggregate_weighted(&updates, &state.lambda)?,
            update_lambda_afl(&state.lambda, &losses, cfg)?,
        ),
        StrategyKind::GenAfl => (
            aggregate_weighted(&updates, &state.lambda)?,
            update_lambda_gen_afl(&state.lambda, &losses, cfg)?,
        ),
        StrategyKind::Vm => {
            let delta = aggregate_vm(&updates, &losses, &state.lambda, cfg.beta)?;
            (theta.sub(&delta)?, state.lambda.clone())
        }
        StrategyKind::Fedavg | StrategyKind::FedIrm | StrategyKind::Fedprox | StrategyKind::Centralized => (
            aggregate_fedavg(&updates, state.lambda.as_slice())?,
            state.lambda.clone(),
        ),
    };

    let record = RoundRecord::new(round + 1, (round + 1) * cfg.local_steps, losses, lambda.clone());
    let next = FederationState {
        global_theta,
        lambda,
        round: round + 1,
        per_client_optimizer: optimizers,
    };
    Ok((next, updates, record))
}

/// Runs `cfg.rounds` rounds over the training clients. The centralized baseline
/// trains a single merged client and keeps its optimizer state across rounds,
/// which makes it plain sequential training over the same step budget.
pub fn run_federation(
    clients: &[Environment],
    spec: &ModelSpec,
    cfg: &StrategyConfig,
    aug: &AugmentationSpec,
    root: &RngStream,
    hooks: &mut [&mut dyn RoundHook],
) -> Result<FederationRun> {
    aug.validate()?;
    if clients.is_empty() {
        return Err(Error::Empty("training clients"));
    }
    let merged;
    let participants: &[Environment] = if cfg.kind == StrategyKind::Centralized {
        merged = [Environment::merge(0, clients)?];
        &merged
    } else {
        clients
    };

    let mut state = initial_state(participants, spec, cfg, root)?;
    let mut records = Vec::with_capacity(cfg.rounds);
    for _ in 0..cfg.rounds {
        let (next, updates, mut record) = run_round(&state, participants, spec, cfg, aug, root)?;
        let ctx = RoundContext {
            spec,
            cfg,
            theta: &next.global_theta,
            updates: &updates,
            is_final: next.round == cfg.rounds,
        };
        for hook in hooks.iter_mut() {
            hook.on_round(&ctx, &mut record).map_err(|e| Error::AfterRound {
                round: next.round,
                source: Box::new(e),
            })?;
        }
        records.push(record);
        state = next;
    }
    Ok(FederationRun {
        records,
        final_theta: state.global_theta,
        final_lambda: state.lambda,
    })
}
