use std::path::PathBuf;

use beckner_core::Error as CoreError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] CoreError),

    #[error("cannot write {path}: {source}")]
    Output {
        path: PathBuf,
        source: std::io::Error,
    },
}

pub fn config_error<S: Into<String>>(msg: S) -> CliError {
    CliError::Config(msg.into())
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core(e) => match e {
                CoreError::Input(_) | CoreError::Format(_) | CoreError::Io(_) => 2,
                CoreError::Capacity(_) => 3,
                CoreError::Inadmissible { .. } => 4,
                CoreError::Singular { .. }
                | CoreError::DegenerateMargin { .. }
                | CoreError::Numeric(_) => 5,
            },
            CliError::Output { .. } => 1,
        }
    }
}
