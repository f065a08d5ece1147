use std::path::PathBuf;

use crate::config::ConfigError;
use crate::io::IoError;

/// Process exit status for each failure class.
pub const EXIT_OK: u8 = 0;
pub const EXIT_FAILURE: u8 = 1;
pub const EXIT_USAGE: u8 = 2;

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Input(IoError),
    /// A well-formed config that asks for something the inputs cannot give.
    #[error("{0}")]
    Usage(String),
    #[error("{stage}: {source}")]
    Numerical {
        stage: String,
        source: mislearn_core::Error,
    },
    #[error(transparent)]
    Output(IoError),
    #[error("creating {path}: {source}")]
    OutputDir {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{} check(s) failed: {}", .0.len(), .0.join("; "))]
    ChecksFailed(Vec<String>),
}

impl PipelineError {
    pub fn exit_code(&self) -> u8 {
        match self {
            PipelineError::Config(_) | PipelineError::Input(_) | PipelineError::Usage(_) => EXIT_USAGE,
            _ => EXIT_FAILURE,
        }
    }

    pub fn numerical(stage: impl Into<String>, source: mislearn_core::Error) -> Self {
        PipelineError::Numerical {
            stage: stage.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, PipelineError>;
