use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {field}: {reason}")]
    Usage { field: String, reason: String },
    #[error("cannot read config {path}: {reason}")]
    Config { path: PathBuf, reason: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("measurement file not found for epsilon = 2^{eps_exp}: {path} (run eta-norms first)")]
    MissingMeasurement { path: PathBuf, eps_exp: i32 },
    #[error(transparent)]
    Compute(#[from] moment_tubes::Error),
}

impl CliError {
    pub fn usage(field: &str, reason: impl Into<String>) -> Self {
        Self::Usage {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit status: 2 for usage errors, 3 for everything that failed
    /// while running. (1 is reserved for completed runs with failing rows.)
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage { .. } | Self::Config { .. } => 2,
            Self::Compute(moment_tubes::Error::InvalidParameter { .. }) => 2,
            _ => 3,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
