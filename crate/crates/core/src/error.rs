use thiserror::Error;

/// Every failure the library reports.
#[derive(Debug, Error)]
pub enum Error {
    #[error("probability must be positive, got {0}")]
    NonPositiveProbability(String),
    #[error("probabilities sum to {0}, expected exactly 1")]
    ProbabilitySumNotOne(String),
    #[error("size values must be nonnegative, got {0}")]
    NegativeValue(String),
    #[error("exponential rate must be positive and finite, got {0}")]
    NonPositiveRate(f64),
    #[error("used capacity {used} exceeds capacity {cap}")]
    UsedExceedsCapacity { used: String, cap: String },
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("instance cannot be simulated on the floating-point grid: {0}")]
    NotSimulable(String),

    #[error("bin {0} is broken and cannot receive items")]
    UseOfBrokenBin(usize),
    #[error("bin {0} does not exist")]
    UseOfNonexistentBin(usize),
    #[error("invalid policy: {0}")]
    InvalidPolicy(String),

    #[error("state space exceeds the limit of {limit} states")]
    StateSpaceTooLarge { limit: usize },
    #[error("item {0} is not finite discrete")]
    NonDiscreteItem(usize),
    #[error("reachable usage set exceeds the limit of {limit} values")]
    UsageSetTooLarge { limit: usize },
    #[error("policy tree would exceed {limit} nodes")]
    TreeTooLarge { limit: usize },
    #[error("policy tree does not match the instance: {0}")]
    InconsistentTree(String),
    #[error("instance too large for exhaustive search: {0}")]
    InstanceTooLarge(String),

    #[error("copy bin broke at item {item} while its source bin had usage {source_usage} within capacity")]
    DeviationLogicBreach { item: usize, source_usage: String },
    #[error("action table was built with different discretization parameters")]
    ParamsMismatch,

    #[error("unknown instance family {0:?}")]
    UnknownName(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("clause {0} does not have width 2")]
    NotWidth2(usize),
    #[error("brute-force counting supports at most 24 variables, got {0}")]
    TooManyVariables(usize),
    #[error("formula is not symmetric under complementing all variables")]
    NotSymmetric,
    #[error("variable {var} appears {count} times in clause {clause}")]
    OccurrenceBound { var: usize, clause: usize, count: usize },
    #[error("satisfying count {count} out of range for {n_vars} variables")]
    CountOutOfRange { count: String, n_vars: usize },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
