use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("validation failed:\n{0}")]
    Validation(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("{path}: corrupt file: {message}")]
    Format { path: PathBuf, message: String },

    #[error("missing input {path}; run the `{stage}` stage first")]
    MissingInput { path: PathBuf, stage: &'static str },

    #[error(transparent)]
    Core(#[from] dds_core::Error),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        CliError::Format {
            path: path.into(),
            message: message.into(),
        }
    }

    /// 0 success, 1 validation failure, 2 I/O or parse error, 3 numerical failure.
    pub fn exit_code(&self) -> i32 {
        use dds_core::Error as E;
        match self {
            CliError::Validation(_) => 1,
            CliError::Io { .. } | CliError::Parse { .. } | CliError::Format { .. } | CliError::MissingInput { .. } => 2,
            CliError::Core(E::InvalidConfig { .. } | E::InvalidRoot { .. }) => 1,
            CliError::Core(_) => 3,
        }
    }
}
