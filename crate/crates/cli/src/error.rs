//! CLI error taxonomy mapped onto process exit codes.

use std::fmt;

/// Exit codes: 1 usage, 2 data, 3 internal invariant violation.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Internal(_) => 3,
        }
    }

    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn data(msg: impl Into<String>) -> Self {
        CliError::Data(msg.into())
    }

    pub fn internal(msg: impl Into<String>) -> Self {
        CliError::Internal(msg.into())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
            CliError::Internal(m) => write!(f, "internal error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

pub type Result<T> = std::result::Result<T, CliError>;

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<sbcm::signal::SignalError> for CliError {
    fn from(e: sbcm::signal::SignalError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<sbcm::filters::FilterError> for CliError {
    fn from(e: sbcm::filters::FilterError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<sbcm::features::FeatureError> for CliError {
    fn from(e: sbcm::features::FeatureError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<sbcm::channel::ChannelError> for CliError {
    fn from(e: sbcm::channel::ChannelError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<sbcm::bwe::BweError> for CliError {
    fn from(e: sbcm::bwe::BweError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<sbcm::classifier::ClassifierError> for CliError {
    fn from(e: sbcm::classifier::ClassifierError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<sbcm::eval::EvalError> for CliError {
    fn from(e: sbcm::eval::EvalError) -> Self {
        CliError::Data(e.to_string())
    }
}
