//! Granular counting and Bayesian inference for fuzzy count data.
//!
//! The crate is `no_std` (it needs `alloc`) and contains only pure numerical code:
//!
//! - [`possibility`]: possibility assignments of observations to referents and the
//!   max–min granular count, both by exhaustive enumeration and by a threshold sweep.
//! - [`fuzzy`]: the Beta-type family of fuzzy counts, α-cuts, least-squares fitting of raw
//!   membership vectors and centroid defuzzification.
//! - [`kernel`]: the fuzzy-reporting kernel over a finite outcome set, its marginals, the
//!   Zadeh probability and the outcome-wise CAR check.
//! - [`model`]: log-likelihoods, gradients and simulators for the hierarchical
//!   coarsening-not-at-random model, the two CAR-like baselines and the defuzzified proxy.
//! - [`inference`]: Hamiltonian Monte Carlo with dual-averaging adaptation and split-R̂/ESS
//!   diagnostics.
//! - [`ppc`]: posterior predictive replication, scalar summaries and energy-like components.
//!
//! File formats, configuration and the command line live in the companion `granular-cli`
//! crate.
#![no_std]
// `!(x > 0.0)` is used deliberately so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(any(feature = "std", test))]
extern crate std;

mod error;
pub mod fuzzy;
pub mod inference;
pub mod kernel;
pub mod model;
pub mod possibility;
pub mod ppc;
pub mod special;
pub mod stats;

pub use error::{Error, Result};
pub use fuzzy::{BetaFuzzy, FitOptions, FitResult};
pub use kernel::{CarVerdict, LatentCountModel, ReportingKernel};
pub use model::{FuzzyObservation, ModelKind, ModelParams, Priors, RegressionSpec};
pub use possibility::{MembershipVector, PossibilityAssignment};

/// Deterministic random stream `stream` of the generator seeded by `seed`.
///
/// Chains, replicates and simulation runs each take their own stream so that parallel
/// execution never shares or overlaps random numbers.
pub fn stream_rng(seed: u64, stream: u64) -> rand_chacha::ChaCha8Rng {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
