use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the simulator and its analysis routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model parameters: {0}")]
    InvalidParams(String),

    #[error("invalid feedback law: {0}")]
    InvalidLaw(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("target set is empty")]
    EmptySet,

    #[error("trace {0:e} is not positive, cannot renormalize")]
    NonPositiveTrace(f64),

    #[error("state left the state space by {distance:e} (bound {bound:e}); reduce dt")]
    DriftExceeded { distance: f64, bound: f64 },

    #[error("negative eigenvalue {0:e} with clipping disabled")]
    NotPositive(f64),

    #[error("generator undefined at this state: {0}")]
    GeneratorDomain(String),

    #[error("no samples above the floor in the fit window (collapse at t = {collapse_time})")]
    WindowEmpty { collapse_time: f64 },

    #[error("sampling infeasible: {0}")]
    InfeasibleSampling(String),

    #[error("unknown preset `{0}`")]
    UnknownPreset(String),

    #[error("step failed at t = {time}: {source}")]
    Step {
        time: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("trajectory {index} failed: {source}")]
    Trajectory {
        index: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn at_time(self, time: f64) -> Self {
        Error::Step {
            time,
            source: Box::new(self),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
