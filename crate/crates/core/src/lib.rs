//! Simulator for federated learning with partial model personalization.
//!
//! Each client `i` holds a personal block `v_i`; all clients share a block
//! `u`. The crate implements FedAvg-P and Scaffold-P, objectives with exact
//! and stochastic gradients, the gradient-norm metrics reported per round,
//! MNIST loading and partitioning, and an experiment harness that writes
//! CSV traces.

pub mod dataio;
pub mod error;
pub mod fedcore;
pub mod harness;
pub mod metrics;
pub mod objectives;
pub mod rng;
pub mod vector;

pub use error::{Error, Result};
pub use fedcore::{Algorithm, HyperParams};
pub use objectives::ObjectiveOracle;
pub use vector::Vec64;
