use rayon::prelude::*;

use crate::data::Environment;
use crate::diagnostics::heterogeneity::heterogeneity;
use crate::diagnostics::records::RoundRecord;
use crate::error::{Error, Result};
use crate::nn::{accuracy, mean_loss, Batch, ModelSpec, ParamVector};
use crate::strategies::{RoundContext, RoundHook};

/// Round hook that fills accuracies, the global objective and, on the final
/// round, the heterogeneity report.
pub struct Evaluator {
    train: Vec<(Batch, f64)>,
    validation: Vec<Batch>,
    ood: Batch,
    heterogeneity_envs: Vec<Environment>,
    every: usize,
}

impl Evaluator {
    /// `train` are the training splits (for `F`), `validation` their held-out
    /// splits and `ood` the unseen environment. Evaluates every `every` rounds
    /// and always on the last one.
    pub fn new(train: &[Environment], validation: &[Environment], ood: &Environment, every: usize) -> Result<Self> {
        if every == 0 {
            return Err(Error::invalid("eval_every_rounds must be >= 1"));
        }
        if train.is_empty() || validation.is_empty() {
            return Err(Error::Empty("evaluation environments"));
        }
        let total: usize = train.iter().map(Environment::len).sum();
        let train = train
            .iter()
            .map(|e| Ok((e.to_batch()?, e.len() as f64 / total as f64)))
            .collect::<Result<_>>()?;
        let mut heterogeneity_envs = validation.to_vec();
        heterogeneity_envs.push(ood.clone());
        Ok(Self {
            train,
            validation: validation.iter().map(Environment::to_batch).collect::<Result<_>>()?,
            ood: ood.to_batch()?,
            heterogeneity_envs,
            every,
        })
    }

    /// Size-weighted mean training loss.
    pub fn objective(&self, spec: &ModelSpec, theta: &ParamVector) -> Result<f64> {
        let parts = self
            .train
            .par_iter()
            .map(|(b, w)| Ok(w * mean_loss(spec, theta, b)?))
            .collect::<Result<Vec<f64>>>()?;
        Ok(parts.iter().sum())
    }

    pub fn id_accuracy(&self, spec: &ModelSpec, theta: &ParamVector) -> Result<f64> {
        let accs = self
            .validation
            .par_iter()
            .map(|b| accuracy(spec, theta, b))
            .collect::<Result<Vec<f64>>>()?;
        Ok(accs.iter().sum::<f64>() / accs.len() as f64)
    }

    pub fn ood_accuracy(&self, spec: &ModelSpec, theta: &ParamVector) -> Result<f64> {
        accuracy(spec, theta, &self.ood)
    }
}

impl RoundHook for Evaluator {
    fn on_round(&mut self, ctx: &RoundContext<'_>, record: &mut RoundRecord) -> Result<()> {
        if !record.round.is_multiple_of(self.every) && !ctx.is_final {
            return Ok(());
        }
        record.id_accuracy = Some(self.id_accuracy(ctx.spec, ctx.theta)?);
        record.ood_accuracy = Some(self.ood_accuracy(ctx.spec, ctx.theta)?);
        record.global_objective = Some(self.objective(ctx.spec, ctx.theta)?);
        if ctx.is_final {
            let mut best = f64::INFINITY;
            for u in ctx.updates {
                best = best.min(self.objective(ctx.spec, &u.theta_after)?);
            }
            record.best_local_objective = Some(best);
            record.grad_sq_norms = Some(heterogeneity(
                &self.heterogeneity_envs,
                ctx.theta,
                ctx.spec,
                "final global model",
            )?);
        }
        Ok(())
    }
}
