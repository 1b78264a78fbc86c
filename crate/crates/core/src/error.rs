use alloc::string::String;

/// Errors raised by the numerical core.
///
/// Variants split into input validation problems ([`Error::is_validation`]) and numerical
/// failures during evaluation; the command line maps these to different exit codes.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("index {index} out of range (len {len})")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("instance too large for oracle: {n_obs} observations (limit {limit})")]
    TooLargeForOracle { n_obs: usize, limit: usize },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("empty fuzzy set")]
    EmptyFuzzySet,
    #[error("kernel construction violated at y = {y}: c(y) = 0")]
    ZeroNormalizer { y: usize },
    #[error("empty compatibility set for outcome {index}")]
    EmptyCompatibilitySet { index: usize },
    #[error("linear predictor overflow at sample {index}: z·β = {eta}")]
    PredictorOverflow { index: usize, eta: f64 },
    #[error("truncation incompatible with mean: total mass {mass:e} on 0..={k}")]
    TruncationIncompatible { k: usize, mass: f64 },
    #[error("non-finite Beta log-density with shapes ({a}, {b})")]
    NonFiniteDensity { a: f64, b: f64 },
    #[error("non-finite log-likelihood contribution at sample {index}")]
    NonFiniteLikelihood { index: usize },
    #[error("non-finite gradient component `{name}`")]
    NonFiniteGradient { name: String },
    #[error("all warmup transitions diverged in chain {chain}; consider re-parametrizing")]
    AllDivergent { chain: usize },
    #[error("requested {requested} replicates but only {available} draws available")]
    NotEnoughDraws { requested: usize, available: usize },
}

impl Error {
    /// True for errors caused by malformed input rather than numerical breakdown.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::IndexOutOfRange { .. }
                | Error::TooLargeForOracle { .. }
                | Error::InvalidInput(_)
                | Error::LengthMismatch { .. }
                | Error::EmptyFuzzySet
                | Error::ZeroNormalizer { .. }
                | Error::EmptyCompatibilitySet { .. }
                | Error::NotEnoughDraws { .. }
        )
    }
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
