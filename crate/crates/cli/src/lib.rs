//! Experiment runner: one pipeline stage per invocation, each leaving a
//! run directory with checkpoints, logs, reports and a manifest.

pub mod ablate;
pub mod config;
pub mod manifest;
pub mod recipes;
pub mod scores;
pub mod stages;

use std::path::{Path, PathBuf};

pub use config::{ExperimentConfig, Stage};
pub use manifest::RunManifest;
pub use stages::run;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Validation(String),

    #[error(transparent)]
    Core(#[from] tritrain::Error),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// 1 for configuration problems, 2 for failures while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) | CliError::Core(tritrain::Error::InvalidConfig(_)) => 1,
            _ => 2,
        }
    }
}
