use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("configuration error: {0}")]
    Config(String),

    /// A demand that cannot be met at any SNR (e.g. positive flow in a
    /// zero-length slot). Distinct from numerical failure.
    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("solver failed after {iterations} Newton steps: {reason}")]
    Solver {
        reason: String,
        iterations: usize,
        last_iterate: Vec<f64>,
    },

    #[error("{failed} of {evaluations} trial evaluations failed, above the {budget} budget")]
    FailureBudget {
        failed: u64,
        evaluations: u64,
        budget: f64,
    },

    #[error("estimation error: {0}")]
    Estimation(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {message}", path.display())]
    Parse { path: PathBuf, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;
