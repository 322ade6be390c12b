//! Experiment driver: runs the reproducible experiments and writes their
//! reports.

pub mod experiments;
pub mod report;

pub use experiments::{run, Experiment, RunOptions};
pub use report::{CsvStream, ExperimentReport, Provenance, Row};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("unknown experiment `{0}`")]
    UnknownExperiment(String),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid option: {0}")]
    InvalidOption(String),
    #[error("row {row}: {source}")]
    Row {
        row: usize,
        #[source]
        source: qrelent::Error,
    },
    #[error("malformed report: {0}")]
    Malformed(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl RunError {
    /// True for failures of the options rather than of the computation.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            RunError::UnknownExperiment(_) | RunError::InvalidGrid(_) | RunError::InvalidOption(_)
        )
    }

    /// True when a solve failed or the solver returned no usable answer.
    pub fn is_solver_failure(&self) -> bool {
        matches!(self, RunError::Row { .. })
    }
}
