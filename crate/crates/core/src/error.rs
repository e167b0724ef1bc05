use thiserror::Error;

use crate::privacy::{BudgetKind, Norm};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("sample index {index} out of range for a dataset of {n} rows")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("singular linear system: {0}")]
    Singular(String),

    #[error("cannot compose a {0} budget with a {1} budget")]
    BudgetKindMismatch(BudgetKind, BudgetKind),

    #[error("{norm} W∞ calibration cannot certify a {kind} budget")]
    NormMismatch { norm: Norm, kind: BudgetKind },

    #[error("point at distance {distance} lies outside the ball of radius {radius}")]
    OutsideDomain { distance: f64, radius: f64 },

    #[error("non-finite gradient encountered at MALA step {step}")]
    NonFiniteGradient { step: usize },

    #[error("probability mass mismatch: {0}")]
    MassMismatch(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }
}

/// Fails with [`Error::InvalidParameter`] unless `value` is finite and strictly positive.
pub(crate) fn ensure_positive(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::param(name, format!("must be finite and > 0, got {value}")))
    }
}
