use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("sample is empty")]
    EmptySample,
    #[error("estimate {0} is not finite")]
    InvalidEstimate(f64),
    #[error("degenerate distribution: {0}")]
    DegenerateDistribution(&'static str),
    #[error("true parameter value is zero; relative bias is undefined")]
    ZeroTrueParameter,
    #[error("insufficient sample: need at least {needed}, got {got}")]
    InsufficientSample { needed: usize, got: usize },
    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(&'static str),
    #[error("invalid population parameters: {0}")]
    InvalidParams(String),
    #[error("invalid missing-data design: {0}")]
    InvalidDesign(String),
    #[error("group label {label} out of range for a design with {groups} groups")]
    InvalidGroup { label: usize, groups: usize },
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("row {0} has no observed values")]
    RowWithoutData(usize),
    #[error("fit did not converge")]
    NonConverged,
    #[error("parameter `{0}` is undefined for this solution (non-positive variance)")]
    InadmissibleForParam(String),
    #[error("unknown parameter `{0}`")]
    UnknownParam(String),
    #[error("condition has {usable} usable estimates in the {arm} arm (minimum {minimum})")]
    ConditionDegenerate {
        arm: &'static str,
        usable: usize,
        minimum: usize,
    },
}
