use std::path::PathBuf;
use thiserror::Error;
use vps_core::VpsError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}: {field}: {msg}", path.display())]
    Config { path: PathBuf, field: String, msg: String },

    #[error("invalid arguments: {0}")]
    Usage(String),

    #[error("missing artifact {}", .0.display())]
    MissingArtifact(PathBuf),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed artifact {}: {msg}", path.display())]
    Artifact { path: PathBuf, msg: String },

    #[error(transparent)]
    Core(#[from] VpsError),
}

impl CliError {
    /// 2 for configuration or usage errors, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } | CliError::Usage(_) => 2,
            _ => 1,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
