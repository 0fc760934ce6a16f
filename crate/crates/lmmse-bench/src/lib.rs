//! Experiment harness for the `colored-lmmse` estimators: Monte Carlo MSE
//! sweeps over an Es/N0 grid and wall-time scaling benchmarks, with
//! deterministic CSV output.

pub mod config;
pub mod experiment;

use std::fmt;

/// Errors surfaced by the harness, split by how the process should exit:
/// configuration and usage problems exit with 2, numerical failures
/// (unstable models, singular systems) with 3.
#[derive(Debug, Clone, PartialEq)]
pub enum BenchError {
    Config(String),
    Numeric(String),
}

impl BenchError {
    pub fn exit_code(&self) -> u8 {
        match self {
            BenchError::Config(_) => 2,
            BenchError::Numeric(_) => 3,
        }
    }
}

impl fmt::Display for BenchError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BenchError::Config(msg) => write!(f, "configuration error: {msg}"),
            BenchError::Numeric(msg) => write!(f, "numerical failure: {msg}"),
        }
    }
}

impl std::error::Error for BenchError {}

impl From<colored_lmmse::Error> for BenchError {
    fn from(e: colored_lmmse::Error) -> Self {
        BenchError::Numeric(e.to_string())
    }
}
