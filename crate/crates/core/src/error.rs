//! Crate-wide error type.

use thiserror::Error;

/// Errors produced anywhere in the simulation and analysis pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// A physical-domain precondition was violated (negative energy,
    /// inconsistent parameters, negative radicand, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// A run configuration is invalid (bad grids, undersampling,
    /// step-size bound violated, unknown keys, ...).
    #[error("configuration error: {0}")]
    Config(String),

    /// The caller misused an API (empty input where data is required, ...).
    #[error("usage error: {0}")]
    Usage(String),

    /// A fit failed to converge or produced unidentifiable parameters.
    #[error("fit error: {0}")]
    Fit(String),

    /// Underlying I/O failure while reading or writing run artifacts.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub fn fit(msg: impl Into<String>) -> Self {
        Error::Fit(msg.into())
    }
}
