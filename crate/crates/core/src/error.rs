use std::path::PathBuf;

use crate::grid::GridDims;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("grid dimensions must be positive, got {height}x{width}")]
    EmptyGrid { height: usize, width: usize },

    #[error("expected {expected} values for a {dims} grid, got {found}")]
    LengthMismatch {
        dims: GridDims,
        expected: usize,
        found: usize,
    },

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: GridDims, right: GridDims },

    #[error("value {value} at index {index} is outside {range}")]
    ValueOutOfRange {
        index: usize,
        value: f64,
        range: &'static str,
    },

    #[error("label {label} at index {index} is outside [0, {max}]")]
    LabelOutOfRange { index: usize, label: u32, max: u32 },

    #[error("epsilon must lie in (0, 0.5), got {0}")]
    InvalidEpsilon(f64),

    #[error("adjacency level must be >= 1, got {0}")]
    InvalidLevel(usize),

    #[error("pixel ({row}, {col}) is outside the {dims} grid")]
    OutOfBounds { row: usize, col: usize, dims: GridDims },

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid scene: {0}")]
    InvalidScene(String),

    #[error("empty region: {0}")]
    EmptyRegion(String),

    #[error("divergence at step {step}: |logit| reached {magnitude} at pixel ({row}, {col})")]
    Divergence {
        step: usize,
        row: usize,
        col: usize,
        magnitude: f64,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }
}
