use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A caller-side contract was violated (e.g. sampling from a non-centered start).
    #[error("contract violation: {0}")]
    Contract(String),

    /// The process parameters do not support the requested quantity.
    #[error("unsupported for these process parameters: {0}")]
    Unsupported(String),

    /// A walk exceeded its step budget.
    #[error("walk truncated after {steps} steps")]
    Truncated { steps: usize },

    /// The linear-programming backend failed.
    #[error("linear program failed: {0}")]
    Lp(String),

    /// An internal arithmetic invariant failed; indicates a bug.
    #[error("consistency error: {0}")]
    Consistency(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
