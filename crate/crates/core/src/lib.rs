//! Thompson Sampling laboratory for stochastic contextual bandits with linear
//! payoffs.
//!
//! The crate simulates the Gaussian-posterior Thompson Sampling policy against
//! adversarially generated contexts and instruments each round with the
//! quantities used to bound its regret: concentration events, saturated arms,
//! a super-martingale built from per-round regret, and explicit envelopes.
//!
//! Modules, bottom-up:
//! - [`linalg`]: rank-one updates, Cholesky, Gaussian sampling, tail bounds.
//! - [`policy`]: posterior state, Thompson Sampling and baselines.
//! - [`environment`]: adversaries, sub-Gaussian rewards, oracle.
//! - [`diagnostics`]: per-round analysis objects and audits.
//! - [`harness`], [`config`], [`output`]: seeded runs, manifests, files.

// `!(x <= y)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod config;
pub mod diagnostics;
pub mod environment;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod output;
pub mod policy;
pub mod rng;

pub use config::ExperimentConfig;
pub use error::{LabError, Result};
pub use harness::{replicate, run_experiment, run_replication, scaling_study, RunResult};
