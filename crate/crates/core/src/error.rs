use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("scenario error: {0}")]
    Scenario(String),

    #[error("lookup table error: {0}")]
    Table(String),

    #[error("config error: {0}")]
    Config(String),

    /// The barrier method stopped before reaching the requested tolerance.
    /// Carries the last (feasible) iterate so callers can inspect it.
    #[error("solver did not converge after {iterations} Newton steps (duality gap {gap:.3e}, dual residual {residual:.3e})")]
    SolverNonConvergence {
        iterations: usize,
        gap: f64,
        residual: f64,
        last_iterate: Vec<Vec<f64>>,
    },

    #[error("solver failure at slot {slot}: {source}")]
    SlotSolve {
        slot: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("internal numeric error: {0}")]
    Numeric(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
