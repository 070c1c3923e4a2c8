use std::path::PathBuf;

use thiserror::Error;

/// Harness failures, grouped by the exit code they map to.
#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{path}:{line}: {message}")]
    Format { path: PathBuf, line: usize, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Wilcoxon(#[from] WilcoxonError),
    #[error("numerical failure: {0}")]
    Numerical(#[from] dynsample_core::Error),
}

impl HarnessError {
    /// 2 for configuration and validation, 3 for data format and IO, 4 for numerics.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) | HarnessError::Wilcoxon(_) => 2,
            HarnessError::Format { .. } | HarnessError::Io { .. } | HarnessError::Csv(_) => 3,
            HarnessError::Numerical(_) => 4,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HarnessError::Io { path: path.into(), source }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WilcoxonError {
    #[error("need at least {required} paired differences, got {found}")]
    TooFewSamples { required: usize, found: usize },
    #[error("every paired difference is zero")]
    AllZeroDeltas,
    #[error("paired difference {index} is not finite")]
    NonFinite { index: usize },
}

pub type Result<T> = std::result::Result<T, HarnessError>;
