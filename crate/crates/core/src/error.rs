use alloc::string::String;

/// Errors surfaced by the core routines.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("class {class} has no rows")]
    EmptyClass { class: u8 },
    #[error("feature index {index} out of range for p = {p}")]
    IndexOutOfRange { index: usize, p: usize },
    #[error("invalid subspace: {0}")]
    InvalidSubspace(&'static str),
    #[error("label {value} at row {row} is not 0 or 1")]
    InvalidLabel { row: usize, value: f64 },
    #[error("non-finite feature value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("matrix is not positive definite even after ridge stabilization")]
    SingularMatrix,
    #[error("argument {0} outside the function domain")]
    DomainError(f64),
    #[error("k = {k} exceeds the admissible maximum {max}")]
    KTooLarge { k: usize, max: usize },
    #[error("sample has zero variance")]
    DegenerateSample,
    #[error("Newton iteration did not converge")]
    NonConvergence,
    #[error("fit failed: {reason}")]
    FitFailure { reason: String },
    #[error("invalid bound: {0}")]
    InvalidBound(&'static str),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("model parameters are not positive definite: {0}")]
    NonPdParameters(&'static str),
}

pub type Result<T> = core::result::Result<T, Error>;
