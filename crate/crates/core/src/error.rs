use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad failure class, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Usage,
    Data,
    Numeric,
}

impl ErrorCategory {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCategory::Usage => "usage",
            ErrorCategory::Data => "data",
            ErrorCategory::Numeric => "numeric",
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// `row` 0 means the manifest itself.
    #[error("missing file {}{}", path.display(), match row { 0 => String::new(), r => format!(" (manifest row {r})") })]
    MissingFile { path: PathBuf, row: usize },

    #[error("malformed row {row} in {path}: {reason}")]
    MalformedRow {
        path: PathBuf,
        row: usize,
        reason: String,
    },

    #[error("duplicate scan_id {scan_id:?} at manifest row {row}")]
    DuplicateScanId { scan_id: String, row: usize },

    #[error("patient {patient_id:?} has conflicting labels (manifest row {row})")]
    ConflictingLabels { patient_id: String, row: usize },

    #[error("duplicate column header {name:?}")]
    DuplicateColumn { name: String },

    #[error("invalid image: {0}")]
    InvalidImage(String),

    #[error("invalid scan: {0}")]
    InvalidScan(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("region is empty: {0}")]
    EmptyRegion(&'static str),

    #[error("no valid pixel pairs for offset ({0}, {1})")]
    EmptyPairs(i32, i32),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("degenerate signal: {0}")]
    DegenerateSignal(String),

    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    #[error("zero-variance feature {0:?}")]
    ZeroVariance(String),

    #[error("class {label} has {count} instances, need at least {needed}")]
    InsufficientClass {
        label: u8,
        count: usize,
        needed: usize,
    },

    #[error("AUC undefined: labels contain a single class")]
    AucUndefined,

    #[error("embedding row {row} has {actual} values, expected {expected}")]
    RaggedEmbedding {
        row: usize,
        expected: usize,
        actual: usize,
    },

    #[error("no embedding for scan {0:?}")]
    MissingEmbedding(String),

    #[error("config line {line}: {reason}")]
    Config { line: usize, reason: String },

    #[error("scan {scan_id}: {source}")]
    Scan {
        scan_id: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn in_scan(self, scan_id: &str) -> Self {
        Error::Scan {
            scan_id: scan_id.to_string(),
            source: Box::new(self),
        }
    }

    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Config { .. } | Error::InvalidParameter(_) => ErrorCategory::Usage,
            Error::EmptyPairs(..)
            | Error::InsufficientData(_)
            | Error::DegenerateSignal(_)
            | Error::DegenerateSample(_)
            | Error::ZeroVariance(_)
            | Error::AucUndefined => ErrorCategory::Numeric,
            Error::Scan { source, .. } => source.category(),
            _ => ErrorCategory::Data,
        }
    }
}
