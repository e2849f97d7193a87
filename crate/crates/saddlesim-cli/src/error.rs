//! Harness-level error type; each variant maps to a process exit code so
//! callers can script against failures.

use thiserror::Error;

/// Errors surfaced by the CLI drivers.
#[derive(Debug, Error)]
pub enum HarnessError {
    /// Malformed or semantically invalid configuration (exit 2).
    #[error("config error: {0}")]
    Config(String),
    /// Every solver in the experiment diverged (exit 3).
    #[error("all solvers diverged; traces were still written for inspection")]
    AllDiverged,
    /// The instance violates an assumption the operation needs (exit 4).
    #[error("assumption violation: {0}")]
    Assumption(String),
    /// Filesystem failure, with the path involved (exit 1).
    #[error("io error at {path}: {message}")]
    Io {
        /// Offending path.
        path: String,
        /// Underlying error text.
        message: String,
    },
    /// Any other runtime failure, e.g. an uncertifiable instance (exit 1).
    #[error("{0}")]
    Failed(String),
}

impl HarnessError {
    /// Process exit code for this error.
    #[must_use]
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::AllDiverged => 3,
            HarnessError::Assumption(_) => 4,
            HarnessError::Io { .. } | HarnessError::Failed(_) => 1,
        }
    }
}
