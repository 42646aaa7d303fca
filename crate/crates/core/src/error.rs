use std::io;

use thiserror::Error;

/// Errors produced anywhere in the simulation, dataset and learning pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("geometry build error: {0}")]
    Build(String),

    #[error("rasterization error: {0}")]
    Rasterize(String),

    #[error("numerical instability: non-finite field detected at step {step}")]
    Instability { step: usize },

    #[error("length mismatch: {0}")]
    LengthMismatch(String),

    #[error("spectrum does not cover {needed_hz} Hz (max {available_hz} Hz)")]
    Coverage { needed_hz: f64, available_hz: f64 },

    #[error("empty band: {0}")]
    EmptyBand(String),

    #[error("dataset corrupted: {0}")]
    Corrupt(String),

    #[error("index {index} out of range (count {count})")]
    OutOfRange { index: usize, count: usize },

    #[error("rank-deficient system: {0}")]
    RankDeficient(String),

    #[error("training diverged at epoch {epoch}")]
    Divergence { epoch: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("I/O error: {0}")]
    Io(#[from] io::Error),

    #[error("serialization error: {0}")]
    Serde(String),
}

impl Error {
    /// Exit code used by the command-line front end.
    ///
    /// 1 validation/config, 2 numerical failure, 3 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io(_) => 3,
            Error::Instability { .. } | Error::RankDeficient(_) | Error::Divergence { .. } | Error::Coverage { .. } => {
                2
            }
            Error::Corrupt(_) => 3,
            _ => 1,
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serde(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
