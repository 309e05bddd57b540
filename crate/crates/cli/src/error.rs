use coe_core::dataset::{ConfigError, DataError};
use coe_core::model_space::SearchError;
use thiserror::Error;

/// Failures surfaced to the shell, one exit code per kind.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Runtime(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Runtime(_) => 4,
        }
    }

    pub fn io(context: impl std::fmt::Display, err: impl std::fmt::Display) -> Self {
        CliError::Io(format!("{context}: {err}"))
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        let message = coe_core::Error::from(e).to_string();
        if message.starts_with("dataset: i/o error") {
            CliError::Io(message)
        } else {
            CliError::Data(message)
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Data(d) => d.into(),
            other => CliError::Config(coe_core::Error::from(other).to_string()),
        }
    }
}

impl From<SearchError> for CliError {
    fn from(e: SearchError) -> Self {
        let config = matches!(e, SearchError::InvalidMcmc(_));
        let message = coe_core::Error::from(e).to_string();
        if config {
            CliError::Config(message)
        } else {
            CliError::Runtime(message)
        }
    }
}
