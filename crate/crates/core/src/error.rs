use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the library can surface.
///
/// Variant names double as the machine-readable `kind` printed by the
/// command-line harness, so renaming one is a breaking change.
#[derive(Debug, Error)]
pub enum Error {
    #[error("bounding box has zero width and zero height")]
    ZeroArea,
    #[error("no fully visible boxes in corpus")]
    NoVisibleBoxes,
    #[error("invalid bounding box [{x1}, {y1}, {x2}, {y2}]")]
    InvalidBox { x1: f64, y1: f64, x2: f64, y2: f64 },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("schema error at line {line}: missing or invalid field `{field}`")]
    Schema { line: usize, field: String },
    #[error("non-monotonic frame index at line {line}: {previous} then {current}")]
    Gap { line: usize, previous: i64, current: i64 },
    #[error("projection error: {0}")]
    Projection(String),

    #[error("majority vote tied at {count} frames each")]
    Tie { count: usize },
    #[error("label error on sample `{sample}`: {source}")]
    Label {
        sample: String,
        #[source]
        source: Box<Error>,
    },
    #[error("no scenario factors requested")]
    EmptyFactors,
    #[error("unknown factor `{0}`")]
    UnknownFactor(String),
    #[error("scenario cell is empty")]
    EmptyCell,

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("horizon {horizon} outside 1..={len}")]
    BadHorizon { horizon: usize, len: usize },

    #[error("shape mismatch in {op}: {lhs:?} vs {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },
    #[error("backward requires a scalar loss, got shape {0:?}")]
    NotScalar(Vec<usize>),
    #[error("variable belongs to a different tape")]
    DetachedNode,
    #[error("parameter `{0}` has no gradient")]
    MissingGrad(String),

    #[error("step-wise fusion needs at least two modalities, got {0}")]
    TooFewModalities(usize),
    #[error("training mode requires the ground-truth future")]
    MissingFuture,
    #[error("branch `{0}` is disabled in this configuration")]
    DisabledBranch(&'static str),
    #[error("corpus has no training samples")]
    EmptyCorpus,
    #[error("bad checkpoint: {0}")]
    BadCheckpoint(String),
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Stable identifier used in machine-parseable error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::ZeroArea => "ZeroArea",
            Error::NoVisibleBoxes => "NoVisibleBoxes",
            Error::InvalidBox { .. } => "InvalidBox",
            Error::Parse { .. } => "ParseError",
            Error::Schema { .. } => "SchemaError",
            Error::Gap { .. } => "GapError",
            Error::Projection(_) => "ProjectionError",
            Error::Tie { .. } => "TieError",
            Error::Label { source, .. } => source.kind(),
            Error::EmptyFactors => "EmptyFactors",
            Error::UnknownFactor(_) => "UnknownFactor",
            Error::EmptyCell => "EmptyCell",
            Error::LengthMismatch { .. } => "LengthMismatch",
            Error::BadHorizon { .. } => "BadHorizon",
            Error::ShapeMismatch { .. } => "ShapeMismatch",
            Error::NotScalar(_) => "NotScalar",
            Error::DetachedNode => "DetachedNode",
            Error::MissingGrad(_) => "MissingGrad",
            Error::TooFewModalities(_) => "TooFewModalities",
            Error::MissingFuture => "MissingFuture",
            Error::DisabledBranch(_) => "DisabledBranch",
            Error::EmptyCorpus => "EmptyCorpus",
            Error::BadCheckpoint(_) => "BadCheckpoint",
            Error::Config(_) => "ConfigError",
            Error::Io { .. } => "IoError",
            Error::Json(_) => "JsonError",
            Error::Csv(_) => "CsvError",
        }
    }
}
