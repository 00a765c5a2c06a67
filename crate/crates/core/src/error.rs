use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure mode surfaced by the toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("cluster {cluster} has no members")]
    EmptyCluster { cluster: usize },

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("label {label} out of range for k={k}")]
    OutOfRangeLabel { label: usize, k: usize },

    #[error("index {index} out of bounds (limit {limit})")]
    IndexOutOfBounds { index: usize, limit: usize },

    #[error("dataset has {n} points, cannot form {k} clusters")]
    DatasetTooSmall { n: usize, k: usize },

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("covariance of component {component} is not positive definite")]
    SingularCovariance { component: usize },

    #[error("empty sample")]
    EmptySample,

    #[error("alpha must lie in (0, 1], got {0}")]
    InvalidAlpha(f64),

    #[error("invalid counts: {successes} successes out of {trials} trials")]
    InvalidCounts { successes: usize, trials: usize },

    #[error("feature count mismatch: {left} vs {right}")]
    FeatureCountMismatch { left: usize, right: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("alpha grid is empty")]
    EmptyGrid,

    #[error("no retrieval for k={0}")]
    MissingRetrieval(usize),

    #[error("metric requires k >= 2, got k={0}")]
    KTooSmall(usize),

    #[error("within-cluster dispersion is zero")]
    ZeroWithinDispersion,

    #[error("gap statistic needs at least 2 reference datasets, got {0}")]
    InvalidB(usize),

    #[error("gap profile must cover at least two values of k")]
    ProfileTooShort,

    #[error("no finite scores to select from")]
    EmptyScores,

    #[error("empty input")]
    EmptyInput,

    #[error("degenerate degrees of freedom: n={n_samples}, p={n_predictors}")]
    DegenerateDof { n_samples: usize, n_predictors: usize },

    #[error("design matrix is rank deficient")]
    RankDeficient,

    #[error("cluster separation {separation} infeasible after {attempts} attempts")]
    SeparationInfeasible { separation: f64, attempts: usize },

    #[error("file not found: {0}")]
    FileNotFound(PathBuf),

    #[error("parse error at row {row}, column {column}: {message}")]
    ParseError {
        row: usize,
        column: String,
        message: String,
    },

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("no records to aggregate")]
    EmptyRecords,

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Stable machine-readable code, written into error records.
    pub fn code(&self) -> &'static str {
        match self {
            Error::EmptyCluster { .. } => "EmptyCluster",
            Error::LengthMismatch { .. } => "LengthMismatch",
            Error::OutOfRangeLabel { .. } => "OutOfRangeLabel",
            Error::IndexOutOfBounds { .. } => "IndexOutOfBounds",
            Error::DatasetTooSmall { .. } => "DatasetTooSmall",
            Error::InvalidDataset(_) => "InvalidDataset",
            Error::InvalidConfig(_) => "InvalidConfig",
            Error::SingularCovariance { .. } => "SingularCovariance",
            Error::EmptySample => "EmptySample",
            Error::InvalidAlpha(_) => "InvalidAlpha",
            Error::InvalidCounts { .. } => "InvalidCounts",
            Error::FeatureCountMismatch { .. } => "FeatureCountMismatch",
            Error::ShapeMismatch(_) => "ShapeMismatch",
            Error::EmptyGrid => "EmptyGrid",
            Error::MissingRetrieval(_) => "MissingRetrieval",
            Error::KTooSmall(_) => "KTooSmall",
            Error::ZeroWithinDispersion => "ZeroWithinDispersion",
            Error::InvalidB(_) => "InvalidB",
            Error::ProfileTooShort => "ProfileTooShort",
            Error::EmptyScores => "EmptyScores",
            Error::EmptyInput => "EmptyInput",
            Error::DegenerateDof { .. } => "DegenerateDof",
            Error::RankDeficient => "RankDeficient",
            Error::SeparationInfeasible { .. } => "SeparationInfeasible",
            Error::FileNotFound(_) => "FileNotFound",
            Error::ParseError { .. } => "ParseError",
            Error::SchemaMismatch(_) => "SchemaMismatch",
            Error::EmptyRecords => "EmptyRecords",
            Error::Io(_) => "Io",
        }
    }

    /// True for errors caused by the input data rather than by usage.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::FileNotFound(_)
                | Error::ParseError { .. }
                | Error::SchemaMismatch(_)
                | Error::InvalidDataset(_)
                | Error::DatasetTooSmall { .. }
                | Error::Io(_)
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
