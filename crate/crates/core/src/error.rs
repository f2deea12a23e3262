use thiserror::Error;

pub type Result<T> = std::result::Result<T, GameError>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GameError {
    #[error("{what} must be non-negative and finite, got {value}")]
    Negative { what: &'static str, value: f64 },

    #[error("{what} must be strictly positive and finite, got {value}")]
    NonPositive { what: &'static str, value: f64 },

    #[error("{what} index {index} out of range (len {len})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        len: usize,
    },

    #[error("{what}: expected length {expected}, got {got}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("allocation row {row} exceeds capacity: {total} > {capacity}")]
    Infeasible {
        row: usize,
        total: f64,
        capacity: f64,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("not applicable: {0}")]
    NotApplicable(String),
}

pub(crate) fn non_negative(what: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() && value >= 0.0 {
        Ok(value)
    } else {
        Err(GameError::Negative { what, value })
    }
}

pub(crate) fn positive(what: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(GameError::NonPositive { what, value })
    }
}

pub(crate) fn same_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(GameError::LengthMismatch {
            what,
            expected,
            got,
        })
    }
}
