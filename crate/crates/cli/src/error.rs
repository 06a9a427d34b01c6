use std::fmt;

use osc_lab::OscError;
use serde::Serialize;

/// Failures that stop an experiment before its assertions are evaluated.
#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    /// Malformed flags, descriptors or grids.
    Config(String),
    /// Inputs parse but violate a mathematical precondition.
    Precondition(String),
    /// The evaluation budget ran out.
    Budget(String),
    Io(String),
}

#[derive(Serialize)]
struct ErrorReport<'a> {
    error: &'a str,
    message: &'a str,
    exit_code: i32,
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Budget(_) => 3,
            _ => 2,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Precondition(_) => "precondition",
            CliError::Budget(_) => "budget",
            CliError::Io(_) => "io",
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Precondition(m) | CliError::Budget(m) | CliError::Io(m) => m,
        }
    }

    /// Single-line JSON written to stderr.
    pub fn to_json(&self) -> String {
        serde_json::to_string(&ErrorReport { error: self.kind(), message: self.message(), exit_code: self.exit_code() })
            .expect("error report serializes")
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.kind(), self.message())
    }
}

impl std::error::Error for CliError {}

impl From<OscError> for CliError {
    fn from(e: OscError) -> Self {
        let msg = e.to_string();
        match e {
            OscError::BudgetExhausted { .. } => CliError::Budget(msg),
            OscError::MomentCondition { .. } | OscError::NonzeroMass { .. } | OscError::DerivativeOrder { .. } | OscError::OutsideGrid { .. } => {
                CliError::Precondition(msg)
            }
            _ => CliError::Config(msg),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
