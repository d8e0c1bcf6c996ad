use crate::trace::SolveTrace;

pub type Result<T, E = UotError> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum UotError {
    #[error("dimension mismatch: expected {expected:?}, got {found:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("domain error: {0}")]
    Domain(&'static str),
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter {
        name: &'static str,
        reason: &'static str,
    },
    #[error("numerical underflow in {context} at index {index}")]
    NumericalUnderflow { context: &'static str, index: usize },
    #[error("numerical overflow in {context} at index {index}")]
    NumericalOverflow { context: &'static str, index: usize },
    #[error("not converged: residual {residual:e} above tolerance {tol:e}")]
    NotConverged { residual: f64, tol: f64 },
    #[error("provenance mismatch: trace and reference were computed on different problems")]
    ProvenanceMismatch,
}

impl UotError {
    /// True for failures of floating point range (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            UotError::NumericalUnderflow { .. } | UotError::NumericalOverflow { .. }
        )
    }
}

/// A solver failure together with the trace recorded up to the failing iteration.
#[derive(Debug, Clone, thiserror::Error)]
#[error("{error} (after {} trace records)", trace.records.len())]
pub struct SolveError {
    pub error: UotError,
    pub trace: SolveTrace,
}

impl SolveError {
    pub fn new(error: UotError, trace: SolveTrace) -> Self {
        SolveError { error, trace }
    }
}
