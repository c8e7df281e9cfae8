use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: String, got: String },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("row block {row_block} is not aligned to downsampling factor {ds}")]
    Alignment { row_block: usize, ds: usize },

    #[error("memory row {0} out of range (0..16)")]
    RowOutOfRange(usize),

    #[error("memory cell ({row}, {col}) read before it was written")]
    UninitializedCell { row: usize, col: usize },

    #[error("memory cell ({row}, {col}) held for {held_s:.4} s, beyond retention")]
    RetentionExceeded { row: usize, col: usize, held_s: f64 },

    #[error("weight {0} outside the sign-magnitude range [-7, 7]")]
    WeightRange(i32),

    #[error("charge sharing needs {expected} psums, got {got}")]
    IncompleteAccumulation { expected: usize, got: usize },

    #[error("unsupported configuration: {0}")]
    UnsupportedConfig(String),

    #[error("normalization undefined: feature map has zero standard deviation")]
    UndefinedNormalization,

    #[error("false-negative rate undefined: ground truth has no positive locations")]
    NoPositives,

    #[error("filter bank holds at most 32 filters, got {0}")]
    BankCapacity(usize),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("{path}: {msg}")]
    Format { path: String, msg: String },

    #[error("i/o error on {path}: {source}")]
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
