use thiserror::Error;

/// Every failure the workbench can report.
///
/// Each variant carries a stable machine-readable code (see [`Error::code`])
/// that the CLI and the HTTP service print verbatim.
#[derive(Debug, Error)]
pub enum Error {
    #[error("design matrix is rank deficient (column {column})")]
    RankDeficient { column: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid degrees of freedom: {0}")]
    InvalidDegreesOfFreedom(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("hermite order {0} exceeds the supported maximum of 30")]
    OrderTooLarge(u32),
    #[error("predictor has zero range; variance function undefined")]
    DegenerateRange,
    #[error("residual rotation produced a zero vector after {0} attempts")]
    DegenerateDraw(usize),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("fitted values are constant or augmented columns collinear")]
    ConstantFitted,
    #[error("sample size {0} outside the supported range 3..=5000")]
    SampleSizeOutOfRange(usize),
    #[error("sample has zero variance")]
    ZeroVariance,
    #[error("observation {0} has leverage one")]
    LeverageOne(usize),
    #[error("omitted-term mean is not in the range of the residual covariance")]
    SingularQuadraticForm,
    #[error("selection {selection} outside 1..={m}")]
    OutOfRangeSelection { selection: u32, m: u32 },
    #[error("a reason is required unless no panel is selected")]
    MissingReason,
    #[error("rating {0} outside 1..=5")]
    InvalidRating(u8),
    #[error("no evaluations")]
    NoEvaluations,
    #[error("alpha-adjusted mode requires an alpha value")]
    AlphaRequired,
    #[error("insufficient null-lineup data: {0}")]
    InsufficientNullData(String),
    #[error("search did not converge: {0}")]
    NonConvergent(String),
    #[error("complete separation: every record {}", if *.all_reject { "rejects" } else { "fails to reject" })]
    Separation { all_reject: bool },
    #[error("every bootstrap resample was degenerate")]
    AllDegenerate,
    #[error("lineup id sets differ: {0}")]
    IdMismatch(String),
    #[error("corrupt manifest: {0}")]
    CorruptManifest(String),
    #[error("attention-check bundles need ln E >= 5 (got {0:.3})")]
    AttentionSignalTooWeak(f64),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub fn code(&self) -> &'static str {
        match self {
            Error::RankDeficient { .. } => "RANK_DEFICIENT",
            Error::DimensionMismatch { .. } => "DIMENSION_MISMATCH",
            Error::InvalidDegreesOfFreedom(_) => "INVALID_DF",
            Error::InvalidArgument(_) => "INVALID_ARGUMENT",
            Error::OrderTooLarge(_) => "ORDER_TOO_LARGE",
            Error::DegenerateRange => "DEGENERATE_RANGE",
            Error::DegenerateDraw(_) => "DEGENERATE_DRAW",
            Error::InsufficientData(_) => "INSUFFICIENT_DATA",
            Error::ConstantFitted => "CONSTANT_FITTED",
            Error::SampleSizeOutOfRange(_) => "SAMPLE_SIZE_OUT_OF_RANGE",
            Error::ZeroVariance => "ZERO_VARIANCE",
            Error::LeverageOne(_) => "LEVERAGE_ONE",
            Error::SingularQuadraticForm => "SINGULAR_QUADRATIC_FORM",
            Error::OutOfRangeSelection { .. } => "OUT_OF_RANGE_SELECTION",
            Error::MissingReason => "MISSING_REASON",
            Error::InvalidRating(_) => "INVALID_RATING",
            Error::NoEvaluations => "NO_EVALUATIONS",
            Error::AlphaRequired => "ALPHA_REQUIRED",
            Error::InsufficientNullData(_) => "INSUFFICIENT_NULL_DATA",
            Error::NonConvergent(_) => "NON_CONVERGENT",
            Error::Separation { .. } => "SEPARATION",
            Error::AllDegenerate => "ALL_DEGENERATE",
            Error::IdMismatch(_) => "ID_MISMATCH",
            Error::CorruptManifest(_) => "CORRUPT_MANIFEST",
            Error::AttentionSignalTooWeak(_) => "ATTENTION_SIGNAL_TOO_WEAK",
            Error::Io(_) => "IO_ERROR",
            Error::Parse(_) => "PARSE_ERROR",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
