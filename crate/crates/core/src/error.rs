use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse error category, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Runtime,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv parse error: {0}")]
    Csv(#[from] csv::Error),
    #[error("empty file: no data rows")]
    EmptyFile,
    #[error("row {line}: expected {expected} columns, found {found}")]
    MalformedRow { line: u64, expected: usize, found: usize },
    #[error("row {line}, column {column}: non-numeric feature value {value:?}")]
    NonNumeric { line: u64, column: usize, value: String },
    #[error("row {line}, column {column}: missing value")]
    MissingValue { line: u64, column: usize },
    #[error("label column {0} not found")]
    LabelColumn(String),
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("need at least {needed} samples, got {found}")]
    TooFewSamples { needed: usize, found: usize },
    #[error("dataset too small: {0}")]
    DatasetTooSmall(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("neighboring centers need at least 2 clusters")]
    SingleCluster,
    #[error("query budget {n_q} exceeds pool size {pool}")]
    BudgetExceedsPool { n_q: usize, pool: usize },
    #[error("query budget must be positive")]
    ZeroBudget,
    #[error("distance must be nonnegative, got {0}")]
    NegativeDistance(f64),
    #[error("reference distance sum must be positive, got {0}")]
    NonPositiveReference(f64),
    #[error("requested {count} samples but only {available} available")]
    CountExceedsAvailable { count: usize, available: usize },
    #[error("sample {0} is not in the unlabeled pool")]
    NotInPool(usize),
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("test set is empty")]
    EmptyTestSet,
    #[error("missing result for strategy {strategy} on dataset {dataset}")]
    MissingCell { dataset: String, strategy: String },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("config: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("strategy {strategy}, seed {seed}: {source}")]
    Cell {
        strategy: String,
        seed: u64,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidParameter(_) | Error::Toml(_) | Error::LabelColumn(_) => ErrorKind::Config,
            Error::Io { .. }
            | Error::Csv(_)
            | Error::EmptyFile
            | Error::MalformedRow { .. }
            | Error::NonNumeric { .. }
            | Error::MissingValue { .. }
            | Error::DatasetTooSmall(_) => ErrorKind::Data,
            Error::Cell { source, .. } => source.kind(),
            _ => ErrorKind::Runtime,
        }
    }
}
