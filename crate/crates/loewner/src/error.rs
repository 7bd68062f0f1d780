use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("monotonicity violation on the {side} branch near x = {x}: inversion of {size:e}")]
    MonotonicityViolation { side: &'static str, x: f64, size: f64 },

    #[error("point {0} is not welded within the horizon")]
    BeyondHorizon(f64),

    #[error("construction failed: {0}")]
    Construction(String),

    #[error("weldings have no common domain")]
    EmptyOverlap,
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
