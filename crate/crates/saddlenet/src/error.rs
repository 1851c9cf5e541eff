use crate::optimizer::TrainTrace;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A network failed structural validation (cycle, dangling edge, ...).
    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    /// Array shapes are inconsistent with the network or with each other.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A value that must be finite is NaN or infinite.
    #[error("non-finite value: {0}")]
    NonFinite(String),

    /// An operation was called with arguments outside its contract.
    #[error("invalid usage: {0}")]
    Usage(String),

    /// A config document failed validation; `field` names the offending key.
    #[error("invalid config: field `{field}`: {msg}")]
    Config { field: String, msg: String },

    /// A CSV file could not be parsed; `row` is the 1-based line number.
    #[error("parse error at row {row}: {msg}")]
    Parse { row: usize, msg: String },

    /// Pruning would leave the network structurally invalid.
    #[error("structural error: {0}")]
    Structural(String),

    /// The saddle-point iteration produced non-finite values. Carries the
    /// trace of the iterations completed before the event.
    #[error("divergence at iteration {iteration}")]
    Diverged {
        iteration: usize,
        trace: Box<TrainTrace>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
