//! File formats, run directories and the command-line driver for
//! `symvmc-core`.

pub mod checkpoint;
pub mod cli;
pub mod commands;
pub mod config;
pub mod error;

pub use config::{ExperimentConfig, Mode};
pub use error::{AppError, Result};
