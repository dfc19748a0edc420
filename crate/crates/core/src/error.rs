use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },

    #[error("empty tail: no individuals are flagged at tau = {tau}")]
    EmptyTail { tau: f64 },

    #[error("insufficient resolution: {0}")]
    InsufficientResolution(String),

    #[error("no positives: mean true score is zero")]
    NoPositives,

    #[error("no requests: p0 + delta_p * (1 - tau) is zero at tau = {tau}")]
    NoRequests { tau: f64 },

    #[error("nudge has no effect; score-optimal undefined")]
    InertNudge,

    #[error("AUC undefined: {0}")]
    AucUndefined(String),

    #[error("population of {n} exceeds the exact-oracle budget of {budget}; use Monte Carlo")]
    OverBudget { n: usize, budget: usize },

    #[error("score-optimal binds; closed form invalid: {0}")]
    RegimeViolated(String),

    #[error("unsupported operation: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        field: field.into(),
        reason: reason.into(),
    }
}
