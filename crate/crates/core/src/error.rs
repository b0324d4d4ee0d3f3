use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("basis with d={d}, P={order} has {size} functions, above the cap of {cap}")]
    BasisTooLarge {
        d: usize,
        order: usize,
        size: u128,
        cap: usize,
    },

    #[error("sparse grid with d={dim}, level={level} exceeds the node cap of {cap}")]
    GridTooLarge { dim: usize, level: usize, cap: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("measurement matrix column {0} is identically zero")]
    ZeroColumn(usize),

    #[error("relative error undefined: reference function has zero norm on the grid")]
    UndefinedError,

    #[error("{0} requires a Hermite basis")]
    RequiresHermite(&'static str),

    #[error("could not bracket KL frequency for branch {branch} (mode {mode})")]
    KlBracket { branch: &'static str, mode: usize },

    #[error("diffusion coefficient is non-positive ({value}) at y={at}")]
    NonPositiveCoefficient { value: f64, at: f64 },

    #[error("invalid config: {0}")]
    Config(String),

    #[error("unknown preset `{0}`")]
    UnknownPreset(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error on {path}: {message}")]
    Serialize { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
