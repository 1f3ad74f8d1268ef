//! Process-level error classification. Exit codes: 0 success, 2 input
//! error, 3 configuration error, 4 statistical abort.

use thiserror::Error;

use crate::config::ConfigError;
use crate::formats::FileError;
use ecgtrend_core::synth::SynthError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(#[from] ConfigError),
    /// A validated configuration still drove some stage outside its
    /// domain (generation impossible, bandwidth too small, ...).
    #[error("{0}")]
    Parameter(String),
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    File(#[from] FileError),
    #[error("{0}")]
    Stats(String),
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> CliError {
        CliError::Parameter(format!("generation failed: {e}"))
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Parameter(_) => 3,
            CliError::Input(_) | CliError::File(_) => 2,
            CliError::Stats(_) => 4,
        }
    }
}
