use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed linear program: {0}")]
    MalformedProgram(String),
    #[error("simplex failed: {0}")]
    NumericalFailure(String),
    #[error("unknown tag `{0}`")]
    UnknownTag(String),
    #[error("solution is not optimal ({0:?})")]
    NotOptimal(crate::lp::Status),

    #[error("empty input")]
    EmptyInput,
    #[error("invalid risk measure: {0}")]
    InvalidMeasure(String),
    #[error("weight at the VaR position is negative ({0:e})")]
    NegativeWeight(f64),

    #[error("scenario tree too large: {size} exceeds cap {cap}")]
    TreeTooLarge { size: u128, cap: u128 },
    #[error("hydro {hydro} needs {needed} inflow lags, got {got}")]
    InsufficientHistory { hydro: usize, needed: usize, got: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("stage {stage} subproblem is {status:?}")]
    StageInfeasible { stage: usize, status: crate::lp::Status },
    #[error("empty batch")]
    EmptyBatch,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("schema error at `{path}`: {message}")]
    Schema { path: String, message: String },
    #[error("dangling reference: {0}")]
    DanglingReference(String),
    #[error("cyclic hydro cascade through `{0}`")]
    CyclicCascade(String),
    #[error("policy was trained on case {expected}, current case is {found}")]
    FingerprintMismatch { expected: String, found: String },
    #[error("corrupt file: {0}")]
    CorruptFile(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures that come from the numerics rather than the input data.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::NumericalFailure(_) | Error::NotOptimal(_) | Error::StageInfeasible { .. })
    }
}
