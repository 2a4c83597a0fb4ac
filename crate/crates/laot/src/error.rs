use std::path::{Path, PathBuf};

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] laot_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::Core(laot_core::Error::InvalidInput(msg.into()))
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// Prefixes an input error with the file it came from.
    pub fn in_file(self, path: &Path) -> Self {
        match self {
            Error::Core(laot_core::Error::InvalidInput(msg)) => {
                Error::invalid(format!("{}: {msg}", path.display()))
            }
            other => other,
        }
    }
}
