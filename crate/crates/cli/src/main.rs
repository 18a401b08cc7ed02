mod args;
mod commands;
mod manifest;

use std::process::ExitCode;

use clap::Parser;
use tracing_subscriber::EnvFilter;

use crate::args::Cli;

/// Failure classes with their process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Failure {
    Other = 1,
    Parse = 2,
    Validation = 3,
    EmptyDataset = 4,
    Model = 5,
}

#[derive(Debug)]
pub struct CliError {
    pub failure: Failure,
    pub source: anyhow::Error,
}

impl CliError {
    pub fn new(failure: Failure, source: impl Into<anyhow::Error>) -> Self {
        Self {
            failure,
            source: source.into(),
        }
    }
}

impl<E: Into<anyhow::Error>> From<E> for CliError {
    fn from(e: E) -> Self {
        Self::new(Failure::Other, e)
    }
}

pub trait FailAs<T> {
    fn fail_as(self, failure: Failure) -> Result<T, CliError>;
}

impl<T, E: Into<anyhow::Error>> FailAs<T> for Result<T, E> {
    fn fail_as(self, failure: Failure) -> Result<T, CliError> {
        self.map_err(|e| CliError::new(failure, e))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let default_level = match cli.global.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new(default_level)))
        .init();

    match commands::dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {:#}", e.source);
            ExitCode::from(e.failure as u8)
        }
    }
}
