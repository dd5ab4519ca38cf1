use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Device directory contents that fail validation.
    #[error("file {} {message}", file.display())]
    Ingest { file: PathBuf, message: String },

    #[error("config {}: {message}", file.display())]
    Config { file: PathBuf, message: String },

    #[error("usage: {0}")]
    Usage(String),

    #[error("pair ({}, {}): {source}", pair.0, pair.1)]
    Simulation {
        pair: (u32, u32),
        #[source]
        source: qwdm_core::Error,
    },

    #[error(transparent)]
    Core(#[from] qwdm_core::Error),

    #[error("csv {}: {source}", path.display())]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

pub type CliResult<T> = Result<T, CliError>;

pub(crate) fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub(crate) fn csv_error(path: &Path) -> impl FnOnce(csv::Error) -> CliError + '_ {
    move |source| CliError::Csv {
        path: path.to_path_buf(),
        source,
    }
}

pub(crate) fn config_error(file: &Path, message: impl Into<String>) -> CliError {
    CliError::Config {
        file: file.to_path_buf(),
        message: message.into(),
    }
}
