//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by the processing chain.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument is outside its documented domain (zero decimation factor,
    /// window longer than the FFT, malformed configuration value, ...).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The input is structurally valid but too short or too sparse for the
    /// requested operation (fewer gait cycles than required, empty mask, ...).
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// A file could not be read or written.
    #[error(transparent)]
    Io(#[from] std::io::Error),

    /// A file was read but its contents do not match the expected format.
    #[error("parse error: {0}")]
    Parse(String),
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn insufficient(msg: impl Into<String>) -> Self {
        Error::InsufficientData(msg.into())
    }
}
