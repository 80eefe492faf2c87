//! The federated training loop and its aggregation rules.
//!
//! Every round broadcasts the global model, trains each client locally (in
//! parallel, each on its own named stream), then aggregates in client-index
//! order. Strategies differ only in the local objective and in how updates and
//! client weights are combined:
//!
//! | kind          | local objective          | aggregation                        |
//! |---------------|--------------------------|------------------------------------|
//! | `fedavg`      | `f_i`                    | `Σ (n_i/N) θ_i`                    |
//! | `afl`         | `f_i`                    | `Σ λ_i θ_i`, λ ascent on `Δ`       |
//! | `gen_afl`     | `f_i`                    | `Σ λ_i θ_i`, λ ascent on `Δ(λ_min)`|
//! | `vm`          | `f_i`                    | `θ − Δ_t` with a variance term     |
//! | `fed_irm`     | `f_i + β·penalty_i`      | `Σ (n_i/N) θ_i`                    |
//! | `fedprox`     | `f_i + μ/2‖θ − θ_t‖²`    | `Σ (n_i/N) θ_i`                    |
//! | `centralized` | merged data, one client  | identity                           |

mod aggregate;
mod config;
mod federation;
mod local;

pub use aggregate::{aggregate_fedavg, aggregate_vm, aggregate_weighted, update_lambda_afl, update_lambda_gen_afl};
pub use config::{Participation, StrategyConfig, StrategyKind};
pub use federation::{
    client_weights, initial_state, initial_theta, run_federation, run_round, FederationRun, FederationState,
    RoundContext, RoundHook,
};
pub use local::{client_stream, local_train, local_train_with, sample_batch, LocalUpdate};
