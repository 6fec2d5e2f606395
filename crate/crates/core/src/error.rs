use std::io;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DadaError {
    /// Tensor or layer shapes that cannot be combined.
    #[error("dimension error: {0}")]
    Dimension(String),
    /// A value outside the domain of an operation (log of a non-positive number, bad label, ...).
    #[error("domain error: {0}")]
    Domain(String),
    /// An API contract was violated by the caller.
    #[error("usage error: {0}")]
    Usage(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("format error: {0}")]
    Format(String),
    /// Training produced a non-finite value.
    #[error("run aborted: {0}")]
    NonFinite(String),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = DadaError> = std::result::Result<T, E>;

impl DadaError {
    /// Process exit code used by the command line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            DadaError::NonFinite(_) => 2,
            _ => 1,
        }
    }
}
