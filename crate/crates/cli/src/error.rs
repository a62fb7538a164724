use std::fmt;

use illiquid_core::Error;

/// A failed run, classified by exit status.
#[derive(Debug)]
pub enum CliError {
    /// Unreadable, malformed or inconsistent configuration (exit 2).
    Config(String),
    /// The model violates a standing assumption (exit 3).
    Assumption(String),
    /// Value iteration hit its iteration cap (exit 4).
    NotConverged(String),
    /// Anything else, e.g. I/O (exit 1).
    Other(String),
}

impl CliError {
    pub fn field(field: &str, reason: &str) -> Self {
        CliError::Config(format!("invalid parameter `{field}`: {reason}"))
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Assumption(_) => 3,
            CliError::NotConverged(_) => 4,
            CliError::Other(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Assumption(m) => write!(f, "assumption violated:\n{m}"),
            CliError::NotConverged(m) => write!(f, "{m}"),
            CliError::Other(m) => write!(f, "{m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter { .. } | Error::Unsupported(_) => CliError::Config(e.to_string()),
            Error::NotConverged { .. } => CliError::NotConverged(e.to_string()),
            other => CliError::Other(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Other(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Other(e.to_string())
    }
}
