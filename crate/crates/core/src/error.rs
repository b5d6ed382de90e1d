use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("store not found at {}", .0.display())]
    StoreMissing(PathBuf),

    /// A record in an interchange or store file is invalid. `line` is 1-based.
    #[error("{file}: line {line}: {message}")]
    Format { file: String, line: usize, message: String },

    #[error("invalid input: {0}")]
    Validation(String),

    #[error("provider misconfigured: {0}")]
    ProviderConfig(String),

    #[error("provider failed: {0}")]
    Provider(String),

    #[error("clustering failed: {0}")]
    Cluster(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(file: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        Error::Format {
            file: file.into(),
            line,
            message: message.into(),
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::StoreMissing(_) => 2,
            Error::ProviderConfig(_) | Error::Provider(_) => 3,
            Error::Validation(_) | Error::Format { .. } | Error::Cluster(_) => 4,
            Error::Io { .. } | Error::Json(_) => 1,
        }
    }
}
