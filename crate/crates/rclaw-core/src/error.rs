use core::fmt;

/// Errors raised by construction and evaluation routines.
#[derive(Debug, Clone, PartialEq)]
pub enum CoreError {
    /// Path times are not strictly increasing from zero, or lengths mismatch.
    InvalidPath(&'static str),
    /// p outside [1, 3) or other parameter out of range.
    InvalidParameter(&'static str),
    /// Interval query with s > t.
    EmptyInterval,
    /// Operands live in different dimensions.
    DimensionMismatch,
    /// A flow trajectory left the padded computational box.
    FlowEscaped { time: f64 },
    /// Solver produced NaN or left the admissible value range.
    SolverBlowup { time: f64 },
    /// Observation ball is not contained in the inner box.
    BallOutOfBox,
    /// A configured integration tolerance was exceeded.
    ToleranceViolation { what: &'static str, value: f64 },
}

impl fmt::Display for CoreError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CoreError::InvalidPath(m) => write!(f, "invalid path: {m}"),
            CoreError::InvalidParameter(m) => write!(f, "invalid parameter: {m}"),
            CoreError::EmptyInterval => write!(f, "interval query requires s <= t"),
            CoreError::DimensionMismatch => write!(f, "dimension mismatch"),
            CoreError::FlowEscaped { time } => {
                write!(f, "flow left the computational box at t = {time}")
            }
            CoreError::SolverBlowup { time } => {
                write!(f, "solver produced NaN/out-of-range values at t = {time}")
            }
            CoreError::BallOutOfBox => write!(f, "observation ball exceeds the inner box"),
            CoreError::ToleranceViolation { what, value } => {
                write!(f, "tolerance violation: {what} = {value}")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for CoreError {}
