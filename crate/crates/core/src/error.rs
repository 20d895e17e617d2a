use alloc::boxed::Box;
use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("{what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("non-finite value in {what} at index {index}")]
    NonFinite { what: &'static str, index: usize },
    #[error("{0} is empty")]
    Empty(&'static str),
    #[error("row {row}: label {label} is not a class index in 0..{classes}")]
    InvalidClassLabel { row: usize, label: f64, classes: usize },
    #[error("row {row}, column {column}: probability {value} outside [0, 1]")]
    InvalidProbability { row: usize, column: usize, value: f64 },
    #[error("row {row}: probabilities sum to {sum}, more than 1e-3 away from 1")]
    ProbabilityRowSum { row: usize, sum: f64 },
    #[error("invalid {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("loss `{loss}` is not {requirement}")]
    UnsupportedLoss { loss: String, requirement: &'static str },
    #[error("weights have no positive entry")]
    ZeroWeights,
    #[error("matrix is numerically singular (condition number {condition:e})")]
    Singular { condition: f64 },
    #[error("posterior draw {index}: {source}")]
    Draw { index: usize, source: Box<Error> },
    #[error("{failed} of {total} posterior draws did not converge (at most {allowed} tolerated)")]
    NonConverged {
        failed: usize,
        total: usize,
        allowed: usize,
    },
    #[error("no sign change on [{lo}, {hi}]: residuals {residual_lo:e} and {residual_hi:e}")]
    Bracket {
        lo: f64,
        hi: f64,
        residual_lo: f64,
        residual_hi: f64,
    },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for failures of the numerics (singular systems, non-convergence,
    /// root bracketing) as opposed to malformed inputs.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::Singular { .. } | Error::NonConverged { .. } | Error::Bracket { .. } => true,
            Error::Draw { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}
