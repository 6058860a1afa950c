use std::path::PathBuf;

/// Errors raised by the t2t pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("missing file: {0}")]
    MissingFile(PathBuf),
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("parse error at row {row}: {reason}")]
    ParseError { row: usize, reason: String },
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("incomplete day for segment {segment} on {date}")]
    IncompleteDay { segment: String, date: String },
    #[error("road {0} has no usable days")]
    EmptyRoad(String),
    #[error("requested K = {k} exceeds {n} rows")]
    KTooLarge { k: usize, n: usize },
    #[error("elbow selection needs at least 3 candidate values of K, got {0}")]
    RangeTooSmall(usize),
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("too few days: {0}")]
    TooFewDays(String),
    #[error("insufficient history: {0}")]
    InsufficientHistory(String),
    #[error("unknown ablation variant: {0}")]
    UnknownVariant(String),
    #[error("missing feature component: {0}")]
    MissingComponent(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by bad user input rather than I/O failures.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Io(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
