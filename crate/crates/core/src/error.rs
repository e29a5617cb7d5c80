use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not positive definite even with diagonal jitter {jitter:e}")]
    NotPositiveDefinite { jitter: f64 },

    #[error("need at least {needed} data points, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("roll simulation blew up at t = {time:.3} s")]
    BlowUp { time: f64 },

    #[error("no wave group within tolerance; nearest standardized distance is {nearest:.3}")]
    NoNearbyGroup { nearest: f64 },

    #[error("unknown {kind} '{given}'; valid ids: {valid}")]
    UnknownId {
        kind: &'static str,
        given: String,
        valid: String,
    },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("config error: {0}")]
    Config(String),
}
