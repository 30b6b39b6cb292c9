use std::fmt;

use dce_core::Error as CoreError;

/// Failure classes with distinct process exit codes.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numeric(String),
    Resource(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Resource(_) => 4,
        }
    }

    /// A core error raised while interpreting the configuration.
    pub fn config(e: CoreError) -> Self {
        match e {
            CoreError::Resource { .. } | CoreError::ClusterTooLarge { .. } => CliError::Resource(e.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Numeric(m) => write!(f, "numerical failure: {m}"),
            CliError::Resource(m) => write!(f, "resource bound: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Resource { .. } | CoreError::ClusterTooLarge { .. } => CliError::Resource(e.to_string()),
            other => CliError::Numeric(other.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
