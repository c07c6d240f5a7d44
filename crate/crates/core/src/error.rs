use thiserror::Error;

/// Errors raised by the engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("csv line {line}: {message}")]
    BadRow { line: u64, message: String },
    #[error("csv input: {0}")]
    Csv(String),
    #[error("table has no data rows")]
    EmptyTable,
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("column `{0}` is constant")]
    ConstantColumn(String),
    #[error("categorical column `{0}` has a single label")]
    SingleLabel(String),
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error("invalid tile: {0}")]
    InvalidTile(String),
    #[error("invalid tiling: {0}")]
    InvalidTiling(String),
    #[error("invalid hypothesis: {0}")]
    InvalidHypothesis(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("enumeration of {n}x{m} permutation vectors exceeds the budget (n<=5, m<=4)")]
    EnumerationBudget { n: usize, m: usize },
    #[error("covariance matrix is numerically zero")]
    ZeroCovariance,
    #[error("projected variance is zero")]
    ZeroDenominator,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("no view has been computed")]
    NoView,
    #[error("nothing to roll back")]
    NothingToRollBack,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// Stable machine-readable code for API envelopes.
    pub fn code(&self) -> &'static str {
        match self {
            Error::BadRow { .. } => "csv.bad_row",
            Error::Csv(_) => "csv.invalid",
            Error::EmptyTable => "csv.empty",
            Error::UnknownColumn(_) => "dataset.unknown_column",
            Error::ConstantColumn(_) => "dataset.constant_column",
            Error::SingleLabel(_) => "dataset.single_label",
            Error::InvalidDataset(_) => "dataset.invalid",
            Error::InvalidTile(_) => "tile.invalid",
            Error::InvalidTiling(_) => "tiling.invalid",
            Error::InvalidHypothesis(_) => "hypothesis.invalid",
            Error::DimensionMismatch(_) => "dimension_mismatch",
            Error::EnumerationBudget { .. } => "enumeration.budget",
            Error::ZeroCovariance => "projection.zero_covariance",
            Error::ZeroDenominator => "projection.zero_denominator",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::NoView => "session.no_view",
            Error::NothingToRollBack => "session.no_tiles",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}
