use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed {what}: {detail}")]
    Format { what: String, detail: String },
    #[error(transparent)]
    Core(#[from] moprompt_core::Error),
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn format(what: impl Into<String>, detail: impl ToString) -> Self {
        Self::Format {
            what: what.into(),
            detail: detail.to_string(),
        }
    }
}

/// Process exit codes.
pub mod exit {
    pub const OK: u8 = 0;
    pub const CONFIG_OR_IO: u8 = 1;
    pub const NUMERICAL_ABORT: u8 = 2;
}
