//! Experiment runner for the extraction simulator: configuration ingestion,
//! kappa sweeps with exact evaluation, multi-round sampling, polynomial
//! fits, CSV emission, and static SVG rendering.

pub mod config;
pub mod fitting;
pub mod report;
pub mod sweep;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("config error: {0}")]
    Config(String),
    #[error("simulation error: {0}")]
    Sim(#[from] sliceqec_core::SimError),
    #[error("numerical invariant violated: {0}")]
    Numeric(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl LabError {
    /// Process exit code: 2 for configuration problems, 3 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Config(_) => 2,
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, LabError>;
