use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the planning library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed manifest {path}: {source}")]
    Manifest {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("raster {path} holds {found} values, expected {expected}")]
    RasterSize {
        path: PathBuf,
        expected: usize,
        found: usize,
    },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("illumination frame {frame} holds out-of-range value {value} at cell index {cell}")]
    FrameRange { frame: usize, cell: usize, value: f64 },

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("cells {from:?} and {to:?} are not 8-adjacent")]
    NotAdjacent { from: (u32, u32), to: (u32, u32) },

    #[error("interval [{t0}, {t1}] lies outside illumination coverage [{start}, {end}]")]
    OutsideCoverage { t0: f64, t1: f64, start: f64, end: f64 },

    #[error("illegal action {action} from state at cell {cell:?}, t = {time}")]
    IllegalAction {
        action: String,
        cell: (u32, u32),
        time: f64,
    },

    #[error("lattice too coarse: time resolution {time_res} s exceeds the shortest action duration {shortest} s")]
    LatticeTooCoarse { time_res: f64, shortest: f64 },

    #[error("malformed recovery policy file: {0}")]
    PolicyFormat(String),

    #[error("scenario hash mismatch: artifact was built for {expected}, scenario is {found}")]
    HashMismatch { expected: String, found: String },

    #[error("instance exceeds micro bounds: {0}")]
    NotMicro(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
