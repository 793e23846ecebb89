use std::io;
use std::path::PathBuf;

use mgcurv_core::{CurvatureError, GraphError, SuiteError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read `{}`: {source}", path.display())]
    Read { path: PathBuf, source: io::Error },
    #[error("cannot write `{}`: {source}", path.display())]
    Write { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Suite(#[from] SuiteError),
    #[error(transparent)]
    Curvature(#[from] CurvatureError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CliError {
    /// 2 for anything the user can fix by changing inputs, 1 otherwise.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Read { .. } | CliError::Write { .. } | CliError::Graph(_) | CliError::Config(_) => 2,
            CliError::Suite(SuiteError::Config(_) | SuiteError::Graph(_)) => 2,
            _ => 1,
        }
    }
}
