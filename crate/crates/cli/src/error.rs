use std::path::PathBuf;

use thiserror::Error;

/// Failures of a scenario run, each mapped to a process exit code.
#[derive(Debug, Error)]
pub enum RunError {
    #[error("invalid configuration:\n  - {}", .0.join("\n  - "))]
    Config(Vec<String>),
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("numeric abort at step {step} (building snapshot {snapshot})")]
    NumericAbort { step: usize, snapshot: usize },
    #[error("numerical failure: {0}")]
    Numeric(#[from] madelung_core::Error),
}

impl RunError {
    pub fn config(message: impl Into<String>) -> Self {
        RunError::Config(vec![message.into()])
    }

    /// 2 for anything wrong with the inputs or the filesystem, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) | RunError::Read { .. } | RunError::Write { .. } => 2,
            RunError::NumericAbort { .. } | RunError::Numeric(_) => 3,
        }
    }
}

pub type RunResult<T> = Result<T, RunError>;
