//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A component was asked to build from an unusable configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// A caller violated an operation's contract (dimension or length mismatch).
    #[error("contract violation: {0}")]
    Contract(String),

    /// A detector refused an input that would exceed its complexity guard.
    #[error("complexity guard: {0}")]
    ComplexityGuard(String),

    /// File I/O failure, carrying the offending path.
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// Malformed text input (config file, codebook file, alist).
    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
