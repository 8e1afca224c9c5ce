use thiserror::Error;

use crate::lp::LpError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unknown building preset `{0}` (expected `old` or `efficient`)")]
    UnknownPreset(String),

    #[error("simulation diverged: {0}")]
    SimulationDiverged(String),

    #[error("value out of range: {0}")]
    OutOfRange(String),

    #[error("window too short: need {needed} steps, got {got}")]
    WindowTooShort { needed: usize, got: usize },

    #[error("episode is done; call reset before stepping again")]
    EpisodeDone,

    #[error("environment has not been reset")]
    NotReset,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("length mismatch: {0}")]
    LengthMismatch(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("training diverged: {0}")]
    TrainingDiverged(String),

    #[error("linear program failed: {0}")]
    Lp(#[from] LpError),

    #[error("config fingerprint mismatch: checkpoint {checkpoint}, environment {environment}")]
    FingerprintMismatch {
        checkpoint: String,
        environment: String,
    },

    #[error("checkpoint format error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by bad input data or files rather than numerics.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::Data(_)
                | Error::WindowTooShort { .. }
                | Error::Io(_)
                | Error::Csv(_)
                | Error::Json(_)
                | Error::Checkpoint(_)
                | Error::FingerprintMismatch { .. }
        )
    }

    pub fn is_divergence(&self) -> bool {
        matches!(self, Error::SimulationDiverged(_) | Error::TrainingDiverged(_))
    }
}
