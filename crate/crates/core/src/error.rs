use thiserror::Error;

use crate::cc::EvalDiagnostics;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid simplex point: {0}")]
    InvalidSimplex(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("all parameters are tied; the uniform limit applies")]
    FullTie,

    #[error(
        "numerical failure: signed sum {signed_sum:e} is not positive \
         (condition number {:e})",
        diag.condition_number
    )]
    NumericalFailure {
        signed_sum: f64,
        diag: EvalDiagnostics,
    },

    #[error("rejection sampler acceptance rate {rate:e} is below the minimum {min:e}")]
    AcceptanceTooLow { rate: f64, min: f64 },

    #[error("Monte Carlo oracle is only trusted for K in 2..=6, got K={0}")]
    UntrustedDimension(usize),

    #[error("effective sample size {ess:.1} is below the floor {floor:.1}")]
    LowEffectiveSampleSize { ess: f64, floor: f64 },

    #[error("sample {index}: {source}")]
    AtSample {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite loss at epoch {epoch}: {snapshot}")]
    NonFiniteLoss { epoch: usize, snapshot: String },

    #[error("value iteration did not converge within {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("degenerate template vectors: {0}")]
    DegenerateTemplates(String),

    #[error("between-cluster sum of squares is zero")]
    ZeroBetweenClusterScatter,

    #[error("class {0} has no samples")]
    MissingClass(usize),

    #[error("guidance quota unreachable: {0}")]
    UnreachableQuota(String),
}

impl Error {
    pub(crate) fn at_sample(self, index: usize) -> Self {
        Error::AtSample {
            index,
            source: Box::new(self),
        }
    }

    /// True when the error, or the error it wraps, is a cancellation failure.
    pub fn is_numerical_failure(&self) -> bool {
        match self {
            Error::NumericalFailure { .. } => true,
            Error::AtSample { source, .. } => source.is_numerical_failure(),
            _ => false,
        }
    }
}
