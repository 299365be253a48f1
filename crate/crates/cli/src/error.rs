use monoapprox::bernstein::BernsteinError;
use monoapprox::{EngineError, OrderError, PhiError, RationalError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Unreadable or malformed input, or an invalid configuration.
    #[error("{0}")]
    Input(String),
    /// Well-formed input that violates a mathematical precondition.
    #[error("{0}")]
    Domain(String),
    /// A result that breaks an invariant the construction guarantees.
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Domain(_) => 3,
            CliError::Internal(_) => 4,
        }
    }

    pub fn input(msg: impl std::fmt::Display) -> Self {
        CliError::Input(msg.to_string())
    }
}

impl From<OrderError> for CliError {
    fn from(e: OrderError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<PhiError> for CliError {
    fn from(e: PhiError) -> Self {
        CliError::Domain(e.to_string())
    }
}

impl From<EngineError> for CliError {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::Order(o) => o.into(),
            e if e.is_internal() => CliError::Internal(e.to_string()),
            e => CliError::Domain(e.to_string()),
        }
    }
}

impl From<BernsteinError> for CliError {
    fn from(e: BernsteinError) -> Self {
        match e {
            BernsteinError::InvalidParameters(_) => CliError::Input(e.to_string()),
            e => CliError::Domain(e.to_string()),
        }
    }
}

impl From<RationalError> for CliError {
    fn from(e: RationalError) -> Self {
        match e {
            RationalError::InvalidParameter(_) => CliError::Input(e.to_string()),
            e => CliError::Domain(e.to_string()),
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Input(format!("invalid JSON: {e}"))
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
