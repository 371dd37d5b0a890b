use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimensions: {0}")]
    InvalidDimensions(String),
    #[error("matrix contains a non-finite value at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("column {0} has zero variance and cannot be standardized")]
    ZeroVarianceColumn(usize),
    #[error("singular value decomposition did not converge")]
    DidNotConverge,
    #[error("singular value {0} is zero, score distance is undefined")]
    ZeroSingularValue(usize),
    #[error("bad segment count {segments} for {rows} rows (need 2 <= K <= I)")]
    BadSegmentCount { segments: usize, rows: usize },
    #[error("decomposition collapsed before component {0}")]
    RankDeficient(usize),
    #[error("y-loading of component {0} is zero")]
    ZeroYLoading(usize),
    #[error("local model of segment {0} cannot supply the requested number of components")]
    SegmentRankDeficient(usize),
    #[error("residual of row {row} in segment {segment} cannot be restored")]
    DegenerateResidual { segment: usize, row: usize },
    #[error("class {class} has {size} members, fewer than the {segments} segments")]
    ClassTooSmall { class: String, size: usize, segments: usize },
    #[error("unknown level {value:?} in column {column:?}")]
    UnknownLevel { column: String, value: String },
    #[error("non-numeric cell in column {column:?} at row {row}")]
    NonNumericCell { column: String, row: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("parse error at row {row}, column {col}: {msg}")]
    ParseError { row: usize, col: usize, msg: String },
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("training diverged at epoch {epoch}")]
    DivergedLoss { epoch: usize },
    #[error("run {cell} failed: {source}")]
    RunFailed {
        cell: String,
        #[source]
        source: Box<Error>,
    },
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
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
