use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("distribution class is empty")]
    EmptyClass,

    #[error("alphabet size mismatch: expected {expected}, got {got}")]
    AlphabetMismatch { expected: usize, got: usize },

    #[error("enumeration needs {needed} items, budget is {budget}")]
    BudgetExceeded { needed: u128, budget: u64 },

    #[error("envelope is not summable ({0}); its class has infinite redundancy")]
    NotSummable(String),

    #[error("Poissonization residual {residual:e} exceeds tolerance {tolerance:e}")]
    ResidualTooLarge { residual: f64, tolerance: f64 },

    #[error("no truncation cutoff up to {max_cutoff} meets tolerance {tolerance:e}")]
    CutoffNotFound { max_cutoff: u64, tolerance: f64 },

    #[error("sub-class member {0} is not a member of the class")]
    NotSubset(usize),

    #[error("malformed input: {0}")]
    Parse(String),

    #[error("I/O failure: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;
