use thiserror::Error;

/// Errors raised by the set computations and their supporting numerics.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("malformed linear program: {0}")]
    MalformedLp(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("set is empty")]
    EmptySet,

    #[error("set is unbounded along a queried direction")]
    UnboundedDirection,

    #[error("operation requires dimension {expected}, set has dimension {found}")]
    WrongDimension { expected: &'static str, found: usize },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid disturbance schedule: {0}")]
    InvalidSchedule(String),

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("SetsNested: coarse invariant set is contained in the fine one; no counterexample region exists")]
    SetsNested,

    #[error("grid resolution too coarse: {0}")]
    ResolutionTooCoarse(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
