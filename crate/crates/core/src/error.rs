use alloc::string::String;

/// Errors produced by the solver, the estimators and the model builders.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("enumeration of {count} subsets exceeds the cap of {cap}")]
    CapExceeded { count: u128, cap: u128 },
    #[error("direction has norm {norm}, expected a unit vector")]
    NonUnitDirection { norm: f64 },
    #[error("the empirical moment polytope is empty")]
    EmptyEmpiricalSet,
    #[error("the model is infeasible")]
    InfeasibleModel,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("direction {index} has zero standard deviation")]
    DegenerateSigma { index: usize },
    #[error("no feasible subproblem")]
    NoFeasibleSubproblem,
    #[error("unknown support label `{0}`")]
    UnknownLabel(String),
    #[error("row {row}: lower bound exceeds upper bound")]
    IntervalViolation { row: usize },
}

pub type Result<T> = core::result::Result<T, Error>;
