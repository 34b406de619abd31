use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {slot}: expected {expected}, got {got}")]
    Dimension {
        slot: String,
        expected: String,
        got: String,
    },

    #[error("{what} index {index} out of range (len {len})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        len: usize,
    },

    #[error("class {class} invalid for factor {factor} (cardinality {cardinality})")]
    InvalidClass {
        factor: usize,
        class: usize,
        cardinality: usize,
    },

    #[error("backward requires a scalar loss node, got shape {rows}x{cols}")]
    NotScalar { rows: usize, cols: usize },

    #[error("at least two factors are required, got {0}")]
    TooFewFactors(usize),

    #[error("predictor target {0} equals its owner; no self-predictor exists")]
    SelfPredictor(usize),

    #[error("empty {0}")]
    Empty(&'static str),

    #[error("sample {sample} has hidden labels; supervised update needs full annotation")]
    Unlabeled { sample: usize },

    #[error("malformed label input for factor {factor}: {reason}")]
    MalformedLabel { factor: usize, reason: String },

    #[error("factor specs differ between datasets")]
    SpecMismatch,

    #[error("unsupported {what} version {found} (expected {expected})")]
    Version {
        what: &'static str,
        found: u64,
        expected: u64,
    },

    #[error("invalid {what}: {reason}")]
    Invalid { what: &'static str, reason: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn dim(slot: impl Into<String>, expected: impl ToString, got: impl ToString) -> Self {
        Error::Dimension {
            slot: slot.into(),
            expected: expected.to_string(),
            got: got.to_string(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
