//! Error type shared by every module in the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied value violates a precondition (bad dimensions,
    /// non-physical constants, malformed configuration, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// An input array contains NaN or infinity where finite values are
    /// required.
    #[error("non-finite value: {0}")]
    NonFinite(String),

    /// Two grids that must agree (dimensions, pitch, wavelength) do not.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// A numerical procedure failed or diverged at runtime.
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("image error: {0}")]
    Image(#[from] image::ImageError),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn non_finite(msg: impl Into<String>) -> Self {
        Error::NonFinite(msg.into())
    }

    pub fn mismatch(msg: impl Into<String>) -> Self {
        Error::GridMismatch(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
