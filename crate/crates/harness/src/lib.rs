//! Configuration, run orchestration and acceptance suite behind the
//! `nullctl` command-line tool.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acceptance;
pub mod config;
pub mod output;
pub mod runner;

use config::ConfigError;

/// Failure of a run, mapped onto the process exit status.
#[derive(Debug)]
pub enum RunError {
    Usage(String),
    Config(ConfigError),
    /// Input rejected by the numerics (shape, spectral condition, ...).
    Validation(String),
    Solver(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Usage(_) => 1,
            RunError::Config(_) | RunError::Validation(_) => 2,
            RunError::Solver(_) => 3,
        }
    }
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Usage(m) => write!(f, "{m}"),
            RunError::Config(e) => write!(f, "config error at {e}"),
            RunError::Validation(m) => write!(f, "invalid problem: {m}"),
            RunError::Solver(m) => write!(f, "solver failure: {m}"),
        }
    }
}

impl std::error::Error for RunError {}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e)
    }
}

impl From<nullctl::Error> for RunError {
    fn from(e: nullctl::Error) -> Self {
        match e {
            nullctl::Error::Invalid(_) | nullctl::Error::Spectral { .. } => RunError::Validation(e.to_string()),
            _ => RunError::Solver(e.to_string()),
        }
    }
}
