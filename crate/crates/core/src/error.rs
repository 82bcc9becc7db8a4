use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch on {axis}: expected {expected}, found {found}")]
    DimensionMismatch {
        axis: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("duplicate LF name `{0}`")]
    DuplicateName(String),

    #[error("LF name mismatch at position {index}: `{expected}` vs `{found}`")]
    NameMismatch {
        index: usize,
        expected: String,
        found: String,
    },

    #[error("out-of-range vote {value} at row {row}, column {col}")]
    VoteOutOfRange { value: i64, row: usize, col: usize },

    #[error("zero embedding vector for LF {0}")]
    ZeroVector(usize),

    #[error("dimension disagreement: LF {index} has dimension {found}, expected {expected}")]
    DimensionDisagreement {
        index: usize,
        expected: usize,
        found: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid structure: {0}")]
    InvalidStructure(String),

    #[error("missing gold labels: {0}")]
    MissingGold(String),

    #[error("missing token count for LF {0}")]
    MissingTokenCount(usize),

    #[error("malformed {what}: {detail}")]
    Malformed { what: String, detail: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("provider returned HTTP status {status}: {body}")]
    HttpStatus { status: u16, body: String },

    #[error("provider request timed out after {0} s")]
    Timeout(f64),

    #[error("provider error: {0}")]
    Provider(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn malformed(what: impl Into<String>, detail: impl ToString) -> Self {
        Error::Malformed {
            what: what.into(),
            detail: detail.to_string(),
        }
    }

    /// Process exit code for this error: 2 for validation failures, 3 for
    /// I/O and provider failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } | Error::HttpStatus { .. } | Error::Timeout(_) | Error::Provider(_) => 3,
            _ => 2,
        }
    }

    /// Short machine-readable category.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::DuplicateName(_) => "duplicate_name",
            Error::NameMismatch { .. } => "name_mismatch",
            Error::VoteOutOfRange { .. } => "vote_out_of_range",
            Error::ZeroVector(_) => "zero_vector",
            Error::DimensionDisagreement { .. } => "dimension_disagreement",
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::InvalidStructure(_) => "invalid_structure",
            Error::MissingGold(_) => "missing_gold",
            Error::MissingTokenCount(_) => "missing_token_count",
            Error::Malformed { .. } => "malformed",
            Error::Io { .. } => "io",
            Error::HttpStatus { .. } => "http_status",
            Error::Timeout(_) => "timeout",
            Error::Provider(_) => "provider",
        }
    }
}
