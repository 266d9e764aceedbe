//! `mhht` command-line tools and the review service.

pub mod commands;
pub mod server;

use std::fmt;

/// Failure of a command, carrying its process exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub error: anyhow::Error,
}

impl CliError {
    /// Usage problems: missing input files, bad flag combinations.
    pub fn usage(msg: impl fmt::Display) -> Self {
        Self {
            code: 2,
            error: anyhow::anyhow!("{msg}"),
        }
    }
}

impl<E: Into<anyhow::Error>> From<E> for CliError {
    fn from(e: E) -> Self {
        Self {
            code: 1,
            error: e.into(),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
