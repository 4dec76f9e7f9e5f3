#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Configuration, orchestration and file output for the `mgt` binary.

pub mod config;
pub mod io;
pub mod pipeline;

use std::path::Path;

use mgt_core::MgtError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid input: {0}")]
    Validation(String),
    #[error("check failed: {0}")]
    Check(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Check(_) => 3,
            CliError::Numerical(_) => 4,
        }
    }

    pub(crate) fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Validation(format!("{}: {e}", path.display()))
    }
}

impl From<MgtError> for CliError {
    fn from(e: MgtError) -> Self {
        match e {
            MgtError::Numerical(_) | MgtError::Resolution(_) | MgtError::Fit(_) => CliError::Numerical(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}
