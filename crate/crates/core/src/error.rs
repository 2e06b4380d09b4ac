use thiserror::Error;

/// Errors raised by the body oracles, estimators and solvers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid body: {0}")]
    InvalidBody(String),

    #[error("singular matrix: {0}")]
    SingularMatrix(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("no closed form available for {0}")]
    NoClosedForm(String),

    #[error("unsupported engine/body pairing: {0}")]
    Unsupported(String),

    #[error("unresolvable mass: {accepted} of {samples} samples landed in the body")]
    UnresolvableMass { accepted: u64, samples: u64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("numerical contradiction: {0}")]
    Contradiction(String),

    #[error("solver stalled: {0}")]
    Stall(String),

    #[error("calibration failed: {0}")]
    Calibration(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
