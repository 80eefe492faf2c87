use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::model::ParamVector;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    #[default]
    Adam,
}

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerState {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub step_count: u64,
}

impl OptimizerState {
    pub fn new(kind: OptimizerKind, learning_rate: f64, num_params: usize) -> Self {
        Self {
            kind,
            learning_rate,
            beta1: ADAM_BETA1,
            beta2: ADAM_BETA2,
            eps: ADAM_EPS,
            first_moment: vec![0.0; num_params],
            second_moment: vec![0.0; num_params],
            step_count: 0,
        }
    }

    pub fn sgd(learning_rate: f64, num_params: usize) -> Self {
        Self::new(OptimizerKind::Sgd, learning_rate, num_params)
    }

    pub fn adam(learning_rate: f64, num_params: usize) -> Self {
        Self::new(OptimizerKind::Adam, learning_rate, num_params)
    }

    /// Applies one update to `theta` in place.
    pub fn step(&mut self, theta: &mut ParamVector, grad: &ParamVector) -> Result<()> {
        theta.ensure_same_layout(grad)?;
        if self.first_moment.len() != theta.len() {
            return Err(Error::dim(format!(
                "optimizer holds {} moments for {} parameters",
                self.first_moment.len(),
                theta.len()
            )));
        }
        self.step_count += 1;
        let lr = self.learning_rate;
        let params = theta.as_mut_slice();
        match self.kind {
            OptimizerKind::Sgd => {
                for (p, g) in params.iter_mut().zip(grad.as_slice()) {
                    *p -= lr * g;
                }
            }
            OptimizerKind::Adam => {
                let t = self.step_count.min(i32::MAX as u64) as i32;
                let c1 = 1.0 - self.beta1.powi(t);
                let c2 = 1.0 - self.beta2.powi(t);
                let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
                for (((p, &g), m), v) in params
                    .iter_mut()
                    .zip(grad.as_slice())
                    .zip(self.first_moment.iter_mut())
                    .zip(self.second_moment.iter_mut())
                {
                    *m = b1 * *m + (1.0 - b1) * g;
                    *v = b2 * *v + (1.0 - b2) * g * g;
                    let m_hat = *m / c1;
                    let v_hat = *v / c2;
                    *p -= lr * m_hat / (v_hat.sqrt() + eps);
                }
            }
        }
        theta.check("optimizer step")
    }
}

/// Value-style wrapper around [`OptimizerState::step`].
pub fn optimizer_step(
    mut state: OptimizerState,
    mut theta: ParamVector,
    grad: &ParamVector,
) -> Result<(ParamVector, OptimizerState)> {
    state.step(&mut theta, grad)?;
    Ok((theta, state))
}
