use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: String,
        expected: usize,
        found: usize,
    },

    #[error("invalid space: {0}")]
    InvalidSpace(String),

    #[error("enumeration too large: {count} vertices requested, cap is 2^{cap}")]
    EnumerationTooLarge { count: usize, cap: usize },

    #[error("generator d{index} is unbound (binding has {available} vectors)")]
    UnboundGenerator { index: usize, available: usize },

    #[error("parse error at {pos}: {msg}")]
    Parse { pos: usize, msg: String },

    #[error("coefficient {index} is negative ({value})")]
    NegativeCoefficient { index: usize, value: f64 },

    #[error("unsupported operand: {0}")]
    Unsupported(String),

    #[error("rank deficient subspace data: rank {rank}, expected {expected}")]
    RankDeficient { rank: usize, expected: usize },

    #[error("invalid parameter {name}: {msg}")]
    InvalidParam { name: String, msg: String },

    #[error("unknown experiment '{0}'")]
    UnknownExperiment(String),

    #[error("solver failure: {0}")]
    Solver(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn dim(what: impl Into<String>, expected: usize, found: usize) -> Self {
        Error::DimensionMismatch {
            what: what.into(),
            expected,
            found,
        }
    }

    pub(crate) fn param(name: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::InvalidParam {
            name: name.into(),
            msg: msg.into(),
        }
    }

    /// True for errors caused by malformed user input rather than internal failure.
    pub fn is_input_error(&self) -> bool {
        !matches!(self, Error::Solver(_) | Error::Io(_))
    }
}
