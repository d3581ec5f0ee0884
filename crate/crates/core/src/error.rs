use std::path::PathBuf;

/// Errors raised while loading inputs or configuring a run.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("embedding dimension mismatch: expected {expected}, found {found} for `{token}`")]
    DimensionMismatch {
        token: String,
        expected: usize,
        found: usize,
    },

    #[error("brute-force pair search limited to {cap} nodes, got {count}")]
    CapExceeded { cap: usize, count: usize },

    #[error("evaluation set is empty")]
    EmptyQuery,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}
