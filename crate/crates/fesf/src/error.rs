use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

/// Errors surfaced by the pipeline and the command line, grouped by exit code.
#[derive(Debug, Error)]
pub enum AppError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("invalid input: {0}")]
    Validation(String),
    #[error(transparent)]
    Core(#[from] fesf_core::Error),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{}: {message}", path.display())]
    Decode { path: PathBuf, message: String },
    #[error("config: {0}")]
    Config(String),
    #[error("{0}")]
    Failed(String),
}

pub type AppResult<T> = Result<T, AppError>;

impl AppError {
    pub const EXIT_FAILED: i32 = 1;
    pub const EXIT_USAGE: i32 = 2;
    pub const EXIT_VALIDATION: i32 = 3;
    pub const EXIT_IO: i32 = 4;
    pub const EXIT_CONFIG: i32 = 5;
    pub const EXIT_TRAINING: i32 = 6;

    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Usage(_) => Self::EXIT_USAGE,
            AppError::Validation(_) => Self::EXIT_VALIDATION,
            AppError::Core(fesf_core::Error::Diverged(_)) => Self::EXIT_TRAINING,
            AppError::Core(_) => Self::EXIT_VALIDATION,
            AppError::Io { .. } | AppError::Decode { .. } => Self::EXIT_IO,
            AppError::Config(_) => Self::EXIT_CONFIG,
            AppError::Failed(_) => Self::EXIT_FAILED,
        }
    }

    pub fn io(path: impl AsRef<Path>, source: io::Error) -> Self {
        AppError::Io {
            path: path.as_ref().to_path_buf(),
            source,
        }
    }
}

pub(crate) trait IoContext<T> {
    fn at(self, path: impl AsRef<Path>) -> AppResult<T>;
}

impl<T> IoContext<T> for io::Result<T> {
    fn at(self, path: impl AsRef<Path>) -> AppResult<T> {
        self.map_err(|e| AppError::io(path, e))
    }
}
