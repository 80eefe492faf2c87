//! Fully connected ReLU classifier with explicit backprop.

mod irm;
mod model;
mod optim;

pub use irm::{
    finite_difference_hvp, hessian_vector_product, hvp_step, irm_penalty_and_grad, irm_terms, IrmTerms, HVP_BASE_STEP,
};
pub use model::{
    accuracy, argmax, forward, loss_and_grad, mean_loss, Activation, Batch, BlockKind, ModelSpec, ParamBlock,
    ParamVector,
};
pub use optim::{optimizer_step, OptimizerKind, OptimizerState, ADAM_BETA1, ADAM_BETA2, ADAM_EPS};
