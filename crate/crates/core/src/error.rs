use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("schema error at line {line}: {msg}")]
    Schema { line: u64, msg: String },
    #[error("frame indices not strictly increasing within shot {0}")]
    Order(String),
    #[error("conflicting labels for shot {0}")]
    DuplicateLabel(String),
    #[error("trajectory has no samples")]
    EmptyTrajectory,
    #[error("invalid trajectory {shot_id}: {msg}")]
    InvalidTrajectory { shot_id: String, msg: String },
    #[error("consecutive positions are identical; approach angle undefined")]
    DegenerateMotion,
    #[error("need at least 2 shots to split, got {0}")]
    TooFewShots(usize),
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("both classes must be present")]
    SingleClassInput,
    #[error("non-finite value in feature column {0}")]
    NonFiniteFeature(usize),
    #[error("expected {expected} columns, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("simulation produced a non-finite state at t = {0} s")]
    NonPhysical(f64),
    #[error("shot {0} has no eligible window at the requested distance")]
    IneligibleShot(String),
    #[error("forward cache was not produced in training mode")]
    StaleCache,
    #[error("training diverged: {0}")]
    Divergence(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
}

/// Coarse failure class, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Data,
    Numeric,
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Config(_) | Error::Checkpoint(_) => ErrorClass::Config,
            Error::DegenerateMotion
            | Error::NonFiniteFeature(_)
            | Error::NonPhysical(_)
            | Error::StaleCache
            | Error::Divergence(_)
            | Error::ShapeMismatch(_)
            | Error::DimensionMismatch { .. } => ErrorClass::Numeric,
            _ => ErrorClass::Data,
        }
    }
}
