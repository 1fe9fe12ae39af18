use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("simulation aborted: {0}")]
    Explosion(String),
    #[error("singular system: {0}")]
    Singular(String),
    #[error("matrix is not symmetric positive semi-definite: {0}")]
    NotPsd(String),
    #[error("no convergence: {0}")]
    NonConvergence(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn dim_check(what: &str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::Dimension(format!("{what}: expected {expected}, got {got}")));
    }
    Ok(())
}
