use thiserror::Error;

/// Errors raised by the simulator, readout model, pulse library and learners.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid waveform: {0}")]
    InvalidWaveform(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("time {t} ns outside pulse window [0, {t_g}] ns")]
    TimeOutOfRange { t: f64, t_g: f64 },

    #[error("amplitude {amplitude} outside action grid [{min}, {max}]")]
    OutOfGrid { amplitude: f64, min: f64, max: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("serialization: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
