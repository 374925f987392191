//! Experiment harness for the purification pipeline: configuration,
//! artifact management, the attack×defense evaluation matrix, parameter
//! sweeps, and the profile stability report.

pub mod artifacts;
pub mod config;
pub mod matrix;
pub mod pipeline;
pub mod stability;
pub mod sweeps;

use std::fmt;

/// Harness failures, split by exit code: configuration problems exit 2,
/// runtime failures exit 3.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Runtime(String),
}

impl CliError {
    pub fn config(message: impl Into<String>) -> CliError {
        CliError::Config(message.into())
    }

    pub fn runtime(message: impl Into<String>) -> CliError {
        CliError::Runtime(message.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Runtime(m) => write!(f, "runtime error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<ada3diff_core::error::Error> for CliError {
    fn from(e: ada3diff_core::error::Error) -> CliError {
        match e {
            ada3diff_core::error::Error::Config(m) => CliError::Config(m),
            other => CliError::Runtime(other.to_string()),
        }
    }
}
