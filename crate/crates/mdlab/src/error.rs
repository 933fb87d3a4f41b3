use thiserror::Error;

/// Error type shared by all modules.
#[derive(Debug, Error)]
pub enum MdError {
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("mode budget exceeded: {retained} retained modes > budget {budget}")]
    Budget { retained: usize, budget: usize },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("non-finite value detected at t = {t}: {what}")]
    NonFinite { t: f64, what: String },

    #[error("config error at line {line}: {msg}")]
    Config { line: usize, msg: String },

    #[error("validation error for `{field}`: {msg}")]
    Validation { field: String, msg: String },

    #[error("checkpoint format error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl MdError {
    pub fn contract(msg: impl Into<String>) -> Self {
        MdError::Contract(msg.into())
    }
    pub fn domain(msg: impl Into<String>) -> Self {
        MdError::Domain(msg.into())
    }
}
