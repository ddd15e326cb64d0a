use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
#[non_exhaustive]
pub enum AdpError {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("dataset shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("combinatorial blowup: enumeration would exceed cap of {cap}")]
    CombinatorialBlowup { cap: usize },

    #[error("unreachable within cap of {cap} steps")]
    Unreachable { cap: usize },

    #[error("invalid privacy budget: epsilon must be positive and finite, got {0}")]
    InvalidBudget(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("no one-sided guarantee available for a non-monotone query")]
    NoOneSidedGuarantee,

    #[error("mixed monotonicity: {0}")]
    MixedMonotonicity(String),

    #[error("out-of-order batch: timestamp {got} precedes {previous}")]
    OutOfOrderBatch { previous: i64, got: i64 },

    #[error("user {user} already assigned to location {existing}, cannot also visit {conflicting}")]
    DuplicateUser {
        user: u64,
        existing: u64,
        conflicting: u64,
    },

    #[error("mixed policies in composition ledger")]
    MixedPolicies,

    #[error("insufficient trials: {got} < required {required}")]
    InsufficientTrials { got: usize, required: usize },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("io error: {0}")]
    Io(String),

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("unknown subcommand: {0}")]
    UnknownSubcommand(String),
}

impl AdpError {
    /// Stable short name used in machine-readable error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            AdpError::DimensionMismatch { .. } => "dimension_mismatch",
            AdpError::ShapeMismatch(_) => "shape_mismatch",
            AdpError::CombinatorialBlowup { .. } => "combinatorial_blowup",
            AdpError::Unreachable { .. } => "unreachable",
            AdpError::InvalidBudget(_) => "invalid_budget",
            AdpError::InvalidParameter(_) => "invalid_parameter",
            AdpError::NoOneSidedGuarantee => "no_one_sided_guarantee",
            AdpError::MixedMonotonicity(_) => "mixed_monotonicity",
            AdpError::OutOfOrderBatch { .. } => "out_of_order_batch",
            AdpError::DuplicateUser { .. } => "duplicate_user",
            AdpError::MixedPolicies => "mixed_policies",
            AdpError::InsufficientTrials { .. } => "insufficient_trials",
            AdpError::Parse { .. } => "parse",
            AdpError::Io(_) => "io",
            AdpError::UndefinedMetric(_) => "undefined_metric",
            AdpError::UnknownSubcommand(_) => "unknown_subcommand",
        }
    }
}

impl From<std::io::Error> for AdpError {
    fn from(e: std::io::Error) -> Self {
        AdpError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, AdpError>;
