//! Deterministic single-process simulator for federated domain generalization.
//!
//! The crate is organised bottom-up:
//!
//! - [`linalg`] and [`rng`]: dense vectors/matrices and named, splittable random streams.
//! - [`nn`]: a small ReLU MLP with hand-written backprop, optimizers and the IRM penalty.
//! - [`data`]: synthetic glyphs, rotated environments, augmentation, Dirichlet splits, IDX ingestion.
//! - [`simplex`]: Euclidean projections onto the simplex and the lower-bounded simplex.
//! - [`strategies`]: the federated loop with FedAvg, AFL, Gen-AFL, VM, Fed-IRM, FedProx and a
//!   centralized baseline.
//! - [`diagnostics`]: gradient-norm heterogeneity, total-variation distances and gap reports.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod diagnostics;
pub mod error;
pub mod linalg;
pub mod nn;
pub mod rng;
pub mod simplex;
pub mod strategies;

pub use error::{Error, Result};
