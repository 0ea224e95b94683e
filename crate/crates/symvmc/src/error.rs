use std::io;
use std::path::PathBuf;

use symvmc_core::error::Error as CoreError;

#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error("config error: {0}")]
    Config(String),

    #[error("training diverged at step {step}: energy {energy}")]
    Diverged { step: usize, energy: f64 },

    #[error("incompatible checkpoint {path}: {reason}")]
    Checkpoint { path: PathBuf, reason: String },

    #[error(transparent)]
    Core(#[from] CoreError),

    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl AppError {
    /// Process exit code: 2 config, 3 divergence, 4 checkpoint, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Config(_) => 2,
            AppError::Diverged { .. } | AppError::Core(CoreError::Diverged { .. }) => 3,
            AppError::Checkpoint { .. } => 4,
            AppError::Core(
                CoreError::EpsilonTooLarge { .. } | CoreError::Divisibility { .. } | CoreError::Interacting,
            ) => 2,
            _ => 1,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        AppError::Io { path: path.into(), source }
    }
}

pub type Result<T, E = AppError> = std::result::Result<T, E>;
