use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("no data points")]
    Empty,

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("non-finite entry {value:?} at row {row}, column {col}")]
    NonFinite {
        row: usize,
        col: usize,
        value: String,
    },

    #[error("matrix is not symmetric at ({row}, {col}): |difference| = {difference:e}")]
    Asymmetric {
        row: usize,
        col: usize,
        difference: f64,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("n = {n} exceeds the enumeration cap of {cap}")]
    TooLarge { n: usize, cap: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }

    pub(crate) fn invalid(message: impl Into<String>) -> Self {
        Error::InvalidParameter(message.into())
    }
}
