use thiserror::Error;

/// Crate-wide error type. Numerical preconditions carry the measured
/// violation so callers can report it without recomputing.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("matrix is not Hermitian: asymmetry {defect:.3e} exceeds tolerance {limit:.3e}")]
    NotHermitian { defect: f64, limit: f64 },

    #[error("matrix is not positive semidefinite: eigenvalue {min_eigenvalue:.6e} below -{limit:.3e}")]
    NotPositive { min_eigenvalue: f64, limit: f64 },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: String,
        got: String,
    },

    #[error("matrix entries must be finite")]
    NonFiniteEntry,

    #[error("invalid tolerance: {0}")]
    InvalidTolerance(&'static str),

    #[error("elements belong to different algebras: {left} vs {right}")]
    AlgebraMismatch { left: String, right: String },

    #[error("invalid algebra: {0}")]
    InvalidAlgebra(&'static str),

    #[error("invalid representation: {0}")]
    InvalidRepresentation(String),

    #[error("matrix images do not define a *-homomorphism: {check} residual {residual:.6e}")]
    NotAHomomorphism { check: &'static str, residual: f64 },

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("element is not in the represented algebra: projection residual {residual:.6e}")]
    NotInAlgebra { residual: f64 },

    #[error("generator span is not closed under the algebra action: generator {generator}, basis element {basis_index}, residual {residual:.6e}")]
    ActionNotClosed {
        generator: usize,
        basis_index: usize,
        residual: f64,
    },

    #[error("matrix is not in the module span: residual {residual:.6e}")]
    NotInModule { residual: f64 },

    #[error("invalid module: {0}")]
    InvalidModule(String),

    #[error("localization Gram matrix is not positive semidefinite: eigenvalue {min_eigenvalue:.6e}")]
    GramNotPsd { min_eigenvalue: f64 },

    #[error("map is not completely positive: Choi eigenvalue {min_eigenvalue:.6e}")]
    NotCompletelyPositive { min_eigenvalue: f64 },

    #[error("dilation precondition failed: {check} residual {residual:.6e}")]
    PreconditionFailed { check: &'static str, residual: f64 },

    #[error("invalid map data: {0}")]
    InvalidMap(String),
}

pub type Result<T> = std::result::Result<T, Error>;
