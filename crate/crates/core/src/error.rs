use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid interval [{lo}, {hi}]: endpoints must be finite and ordered")]
    InvalidInterval { lo: f64, hi: f64 },

    #[error("division by an interval containing zero: [{lo}, {hi}]")]
    DivisionByZeroInterval { lo: f64, hi: f64 },

    #[error("cannot bisect dimension {dim}: component is degenerate")]
    DegenerateDimension { dim: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("no bisectable dimension in an undecided box")]
    NoBisectableDimension,

    #[error("{what} index {index} out of range (limit {limit})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        limit: usize,
    },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("model file schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("parse error in {}: line {line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{}: line {line}: expected {expected} columns, found {found}", path.display())]
    WrongColumnCount {
        path: PathBuf,
        line: usize,
        expected: usize,
        found: usize,
    },

    #[error("{}: bad IDX magic number {found:#010x}, expected {expected:#010x}", path.display())]
    BadMagic {
        path: PathBuf,
        found: u32,
        expected: u32,
    },

    #[error("image/label count mismatch: {images} images, {labels} labels")]
    CountMismatch { images: usize, labels: usize },

    #[error("loss became non-finite at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },

    #[error("pattern is classified as class {predicted}, not the requested class {expected}")]
    MisclassifiedInput { predicted: usize, expected: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{}: {source}", path.display())]
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
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
