use std::fmt;
use std::process::ExitCode;

use rankdesign::Error;

/// Failure classes with stable exit codes.
#[derive(Debug)]
pub enum CliError {
    /// Exit 2: no finite design reaches the target.
    Infeasible(String),
    /// Exit 64: bad flags or out-of-domain values.
    Usage(String),
    /// Exit 65: unreadable or invalid configuration document.
    Config(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Infeasible(_) => 2,
            CliError::Usage(_) => 64,
            CliError::Config(_) => 65,
        })
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Infeasible(m) => write!(f, "infeasible: {m}"),
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Config(m) => write!(f, "config error: {m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Infeasible(m) => CliError::Infeasible(m),
            other => CliError::Usage(other.to_string()),
        }
    }
}

pub fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}
