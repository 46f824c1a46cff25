use std::fmt;
use std::process::ExitCode;

use estsched::Error as CoreError;

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, unreadable or ill-formed configuration.
    Config(String),
    Io(String),
    /// A mathematical precondition (stability, convergence) failed.
    Precondition(String),
    /// A checked invariant or reproduction failed.
    Violation(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Config(_) | CliError::Io(_) => 1,
            CliError::Precondition(_) => 2,
            CliError::Violation(_) => 3,
        })
    }

    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
            CliError::Precondition(m) => write!(f, "precondition failed: {m}"),
            CliError::Violation(m) => write!(f, "invariant violated: {m}"),
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match &e {
            CoreError::StabilityPrecondition { lambda, bound } => CliError::Precondition(format!(
                "best reception probability {lambda:.5} does not exceed the stability bound {bound:.5} = 1 - 1/rho(A)^2"
            )),
            CoreError::NotConverged { .. } | CoreError::DegenerateGain { .. } => {
                CliError::Precondition(e.to_string())
            }
            _ if e.is_precondition() => CliError::Precondition(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}
