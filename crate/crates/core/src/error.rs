use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid cost function: {0}")]
    InvalidCost(String),
    #[error("negative argument {0} for a cost function")]
    NegativeArgument(f64),
    #[error("malformed structure: {0}")]
    Structure(String),
    #[error("condition 1 violated: {0}")]
    Condition1(String),
    #[error("condition 2 violated: {0}")]
    Condition2(String),
    #[error("games do not share a structure")]
    StructureMismatch,
    #[error("infeasible flow: {0}")]
    InfeasibleFlow(String),
    #[error("unknown path index {0}")]
    UnknownPath(usize),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("solver did not converge after {iterations} iterations (gap {gap:e}, tol {tol:e})")]
    Unconverged {
        iterations: usize,
        gap: f64,
        tol: f64,
    },
    #[error("invariant violated: {0}")]
    InvariantViolation(String),
    #[error("too few usable records: {usable} (need {needed})")]
    TooFewRecords { usable: usize, needed: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Stable machine-readable name of the error kind.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidCost(_) => "invalid_cost",
            Error::NegativeArgument(_) => "negative_argument",
            Error::Structure(_) => "structure",
            Error::Condition1(_) => "condition1",
            Error::Condition2(_) => "condition2",
            Error::StructureMismatch => "structure_mismatch",
            Error::InfeasibleFlow(_) => "infeasible_flow",
            Error::UnknownPath(_) => "unknown_path",
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::Precondition(_) => "precondition",
            Error::Unconverged { .. } => "unconverged",
            Error::InvariantViolation(_) => "invariant_violation",
            Error::TooFewRecords { .. } => "too_few_records",
        }
    }

    /// Process exit code: 2 input error, 3 unconverged, 4 invariant violation.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Unconverged { .. } => 3,
            Error::InvariantViolation(_) => 4,
            _ => 2,
        }
    }
}
