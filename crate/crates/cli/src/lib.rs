//! Batch driver for the vulnprice engines: price tables, convergence
//! studies, model checks and timing benchmarks, all written as CSV.

pub mod bench;
pub mod config;
pub mod run;
pub mod table;

use thiserror::Error;
use vulnprice::PricingError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

impl From<PricingError> for CliError {
    fn from(e: PricingError) -> Self {
        match e {
            PricingError::StepSizeUnderflow { .. } | PricingError::Numeric(_) => CliError::Numeric(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}
