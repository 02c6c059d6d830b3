use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum AppError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Numerical(#[from] nanopulse_core::Error),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {source}", path.display())]
    Csv { path: PathBuf, source: csv::Error },
    #[error("plot: {0}")]
    Plot(String),
}

impl AppError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        AppError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// Process exit status: 2 for configuration, 3 for numerical and 4 for
    /// file-system failures.
    pub fn exit_code(&self) -> i32 {
        use nanopulse_core::Error as E;
        match self {
            AppError::Config(_) => 2,
            AppError::Numerical(E::Config(_) | E::Domain(_) | E::OutOfBand { .. }) => 2,
            AppError::Numerical(_) => 3,
            AppError::Io { .. } | AppError::Csv { .. } | AppError::Plot(_) => 4,
        }
    }
}
