use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("raster dimensions must be positive, got {height}x{width}")]
    InvalidDimensions { height: usize, width: usize },

    #[error("expected {expected} values for the raster, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("non-finite value at flat index {0}")]
    NonFinite(usize),

    #[error("DimensionMismatch: {left_height}x{left_width} vs {right_height}x{right_width}")]
    DimensionMismatch {
        left_height: usize,
        left_width: usize,
        right_height: usize,
        right_width: usize,
    },

    #[error("pixel ({x}, {y}) lies outside the raster")]
    PointOutOfBounds { x: usize, y: usize },

    #[error("EmptyMask: mask has no foreground pixels")]
    EmptyMask,

    #[error("WidthMismatch: curve width {curve} does not match raster width {raster}")]
    WidthMismatch { curve: usize, raster: usize },

    #[error("RowOutOfRange: column {column} has row {row}, allowed range is [0, {max_row}]")]
    RowOutOfRange { column: usize, row: f64, max_row: usize },

    #[error("CurveCrossing: ILM lies below BM at column {0}")]
    CurveCrossing(usize),

    #[error("curve has no defined values to interpolate from")]
    EmptyCurve,

    #[error("BoundsError: column range [{left}, {right}] invalid for width {width}")]
    BoundsError { left: usize, right: usize, width: usize },

    #[error("EmptyPrediction: coarse prediction has no foreground")]
    EmptyPrediction,

    #[error("IncompleteCorners: all four corner points are required")]
    IncompleteCorners,

    #[error("EmptyCohort: no frames left after exclusion")]
    EmptyCohort,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("SpecInfeasible{}: {reason}", frame.map(|f| format!(" (frame {f})")).unwrap_or_default())]
    SpecInfeasible { frame: Option<usize>, reason: String },

    #[error("{}: {message}", path.display())]
    Format { path: PathBuf, message: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn dims(left: (usize, usize), right: (usize, usize)) -> Self {
        Error::DimensionMismatch {
            left_height: left.0,
            left_width: left.1,
            right_height: right.0,
            right_width: right.1,
        }
    }

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

    /// True for failures of the filesystem itself, as opposed to bad input.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }
}
