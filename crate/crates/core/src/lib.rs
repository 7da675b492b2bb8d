//! Statistical robustness estimation for neural-network properties.
//!
//! Instead of a binary SAT/UNSAT answer, this crate estimates the probability
//! `I = P(s(X) >= 0)` that a property function `s` is violated when inputs are
//! drawn from an input model `p(x)`. Rare probabilities are estimated with
//! adaptive multi-level splitting (AMLS): a population of Markov chains is
//! pushed through a data-driven sequence of levels `L_1 < ... < L_K = 0`, each
//! level keeping a fraction of the chains and rejuvenating the population with
//! Metropolis–Hastings moves. A probability floor turns runs on impossible
//! events into a finite-time "numerically zero" verdict.
//!
//! Modules:
//! - [`input_model`]: uniform boxes and clipped l∞ balls (plus a standard
//!   normal model used for validation).
//! - [`network`]: dense/ReLU inference and the JSON weight file.
//! - [`property`]: adversarial margin and linear property functions.
//! - [`estimator`]: naive Monte Carlo and the AMLS engine.
//! - [`oracle`]: closed-form ground truth problems.
//! - [`job`]: job configs, reports, sweeps and the self-test harness behind
//!   the `verify` binary.

pub mod error;
pub mod estimator;
pub mod input_model;
pub mod job;
pub mod network;
pub mod oracle;
pub mod property;
pub mod seed;

pub use error::{Error, Result};
pub use estimator::{amls_run, naive_mc, AmlsConfig, AmlsResult, LogEstimate, NaiveMcResult};
pub use input_model::InputModel;
pub use network::{Layer, Network};
pub use property::PropertySpec;
