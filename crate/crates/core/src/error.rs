use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty dataset has no empirical distribution")]
    EmptyDataset,

    #[error("datasets belong to different universes")]
    UniverseMismatch,

    #[error("invalid universe: {0}")]
    InvalidUniverse(String),

    #[error("sample does not fit the universe: {0}")]
    InvalidSample(String),

    #[error("split size {requested} out of range for dataset of {available} samples")]
    SplitOutOfRange { requested: u64, available: u64 },

    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    #[error("no escape feature exists: the signal set covers the whole feature space")]
    NoEscapeFeature,

    #[error(
        "erasure precondition violated: n={n} outside the admissible window [{n_min}, {n_max}]"
    )]
    ErasureWindow { n: u64, n_min: u64, n_max: u64 },

    #[error("label table has no entry for feature {0}")]
    MissingTableEntry(String),

    #[error("unknown label name: {0}")]
    UnknownLabel(String),

    #[error("unknown feature or category: {0}")]
    UnknownCategory(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("nothing to emit: result table is empty")]
    EmptyTable,

    #[error("csv format error: {0}")]
    CsvFormat(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
