use thiserror::Error;

/// Errors raised across the simulation, optimization and pipeline layers.
#[derive(Debug, Error)]
pub enum Error {
    /// An invalid (model, boundary, size, backend) combination or malformed input.
    #[error("configuration error: {0}")]
    Config(String),
    /// The requested operation is outside what a backend can do.
    #[error("capability error: {0}")]
    Capability(String),
    /// A precondition of an operation was violated by the caller.
    #[error("contract violation: {0}")]
    Contract(String),
    /// An iterative method failed to converge or produced non-finite values.
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("size mismatch: expected {expected}, got {got}")]
    Mismatch { expected: usize, got: usize },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io { path: path.as_ref().display().to_string(), source }
    }
}
