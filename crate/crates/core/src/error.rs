use std::path::PathBuf;

use crate::model::Unit;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("unit mismatch: expected {expected:?}, found {found:?}")]
    UnitMismatch { expected: Unit, found: Unit },

    #[error("series too short: need at least {needed} samples, got {got}")]
    Length { needed: usize, got: usize },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("parse error at row {row}, column {column}: cannot read {value:?} as a number")]
    Parse {
        row: usize,
        column: usize,
        value: String,
    },

    #[error("missing frame indices: {missing:?}")]
    FrameGap { missing: Vec<usize> },

    #[error("unknown joint or marker {0:?}")]
    Lookup(String),

    #[error("degenerate range: series is constant")]
    DegenerateRange,

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("force signal error: {0}")]
    Signal(String),

    #[error("no flight phase found in force trace")]
    NoFlight,

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("series not aligned: lengths {0} and {1}")]
    Alignment(usize, usize),

    #[error("non-physical result: {0}")]
    NonPhysical(String),

    #[error("segmentation failed: {0}")]
    Segmentation(String),

    #[error("pairing error: {0} vs {1} measurements")]
    Pairing(usize, usize),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

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
}
