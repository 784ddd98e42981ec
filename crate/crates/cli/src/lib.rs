//! Scene-driven batch front end for the `lightray` toolkit.

pub mod commands;
pub mod envelope;
pub mod scene;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("config: {0}")]
    Config(String),
    #[error("i/o: {0}")]
    Io(String),
    #[error("numerical: {0}")]
    Numerical(#[from] lightray::Error),
}

impl CliError {
    /// Process exit status: 2 for usage and configuration problems, 3 for
    /// numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) | Self::Config(_) | Self::Io(_) => 2,
            Self::Numerical(_) => 3,
        }
    }
}
