use thiserror::Error;

use crate::data::StratumLabel;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("row {row}: {reason}")]
    InvalidRow { row: usize, reason: String },

    #[error("row {row}: expected {expected} covariates, found {found}")]
    RaggedRow {
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("need at least {min} observations, got {found}")]
    TooFewObservations { min: usize, found: usize },

    #[error("length mismatch for {what}: {left} vs {right}")]
    LengthMismatch {
        what: &'static str,
        left: usize,
        right: usize,
    },

    #[error("dimension mismatch: expected {expected} coefficients, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("unknown stratum label {0}")]
    UnknownStratum(StratumLabel),

    #[error("no uncensored observations")]
    NoEvents,

    #[error("stratum {0} has no events; expected survival cannot be predicted")]
    NoEventsInStratum(StratumLabel),

    #[error("invalid {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("strata with fewer than {k_folds} observations: {labels:?}")]
    UndersizedStrata {
        k_folds: usize,
        labels: Vec<StratumLabel>,
    },

    #[error("config: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
