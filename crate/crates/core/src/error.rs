use thiserror::Error;

use crate::rates::Regime;

/// Errors raised by the rate-region and simulation routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A formula was evaluated outside the regime it is stated for.
    #[error(
        "regime violation: expected {expected:?}, but residual {residual} vs threshold {threshold}"
    )]
    RegimeViolation {
        expected: Regime,
        residual: f64,
        threshold: f64,
    },

    /// Neither of the corner-point power relations holds.
    #[error("power condition violated: {0}")]
    ConditionViolation(String),

    /// A scheme preset was requested for parameters it cannot be built for.
    #[error("precondition violated: {0}")]
    Precondition(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
