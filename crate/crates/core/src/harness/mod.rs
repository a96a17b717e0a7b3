//! Config-driven experiment runner and report writer behind the `reclab` CLI.

mod config;
mod report;
mod run;

pub use config::{Experiment, ExperimentConfig, GridConfig, MapSpec, MeasureSpec, OutputConfig, TargetSpec, FORMATS};
pub use report::{emit_report, load_results};
pub use run::{bounds_report, run, BoundsReport, CantorReport, Payload, Provenance, ResultSet, Summary};

use crate::error::Error;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Validation(Vec<String>),
    #[error(transparent)]
    Compute(#[from] Error),
    #[error("{0}")]
    Io(String),
}

impl HarnessError {
    /// 2 for bad input, 3 for a numerical failure, 1 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Validation(_) => 2,
            HarnessError::Compute(e) if e.is_numerical() => 3,
            HarnessError::Compute(_) => 2,
            HarnessError::Io(_) => 1,
        }
    }
}

impl From<std::io::Error> for HarnessError {
    fn from(e: std::io::Error) -> Self {
        HarnessError::Io(e.to_string())
    }
}
