use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("spectrum `{id}`: expected {expected} values on the grid, found {found}")]
    GridMismatch {
        id: String,
        expected: usize,
        found: usize,
    },

    #[error("spectrum `{id}`: non-finite value at index {index}")]
    NonFiniteValue { id: String, index: usize },

    #[error("spectrum `{id}`: unknown label `{label}`")]
    UnknownLabel { id: String, label: String },

    #[error("{path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("range [{low}, {high}] cm-1 lies outside the grid [{grid_low}, {grid_high}] cm-1")]
    RangeOutsideGrid {
        low: f64,
        high: f64,
        grid_low: f64,
        grid_high: f64,
    },

    #[error("zero variance: standard deviation {0:e} is below 1e-12")]
    ZeroVariance(f64),

    #[error("input too short: need at least {needed} values, got {got}")]
    TooShort { needed: usize, got: usize },

    #[error("length mismatch: {0}")]
    LengthMismatch(String),

    #[error("spectrum `{id}`: {source}")]
    InSpectrum {
        id: String,
        #[source]
        source: Box<Error>,
    },

    #[error("class `{0}` has no samples")]
    EmptyClass(String),

    #[error("too few samples: {0}")]
    TooFewSamples(String),

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite activation in layer `{0}`")]
    NonFiniteActivation(String),

    #[error("training diverged at epoch {epoch}: loss is {loss}")]
    Diverged { epoch: usize, loss: f64 },

    #[error("band `{0}` contains no grid points")]
    EmptyBand(String),

    #[error("fold {fold}: {source}")]
    Fold {
        fold: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn in_spectrum(id: &str, source: Error) -> Self {
        Error::InSpectrum {
            id: id.to_string(),
            source: Box::new(source),
        }
    }

    /// True when the error stems from bad input or configuration rather than
    /// a failure while running a valid job.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::Diverged { .. } | Error::NonFiniteActivation(_) | Error::Io { .. } => false,
            Error::InSpectrum { source, .. } | Error::Fold { source, .. } => source.is_validation(),
            _ => true,
        }
    }
}
