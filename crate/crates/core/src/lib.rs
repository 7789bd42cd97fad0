//! Operator learning with learnable finite-element hat bases.
//!
//! The crate provides the hat basis itself, small dense networks with
//! analytic gradients, the three operator models (hat-basis, DeepONet and
//! POD), a deterministic Adam trainer and the evaluation tooling used to
//! compare them.

pub mod data;
pub mod dense_nets;
pub mod error;
pub mod evalkit;
pub mod hat_basis;
pub mod json;
pub mod operator_models;
pub mod pod;
pub mod seeding;
pub mod trainer;

pub use error::{FernError, Result};
