use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the estimation and testing pipeline.
#[derive(Debug, Error)]
pub enum LrdError {
    #[error("point is not on the unit sphere (norm = {norm})")]
    NotOnSphere { norm: f64 },

    #[error("spectral density has a pole at zero frequency (alpha = {alpha})")]
    Pole { alpha: f64 },

    #[error("non-stationary autoregressive part at degree {degree}: {detail}")]
    NonStationary { degree: usize, detail: String },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error(
        "integration window [-{half_width:.4}, {half_width:.4}] holds no Fourier frequency at T = {len}; \
         increase T or the bandwidth"
    )]
    EmptyWindow { len: usize, half_width: f64 },

    #[error("sieve too small: {0}")]
    SieveTooSmall(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl LrdError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        LrdError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, LrdError>;
