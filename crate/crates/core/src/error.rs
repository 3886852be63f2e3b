use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the library can report.
///
/// Variants that name a standing hypothesis of a quantum dynamical system
/// (`NotUnital`, `NotCp`, ...) are validation rejections; the CLI maps them
/// to exit code 2.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix contains non-finite entries")]
    NonFinite,

    #[error("invalid tolerance: {0}")]
    InvalidTolerance(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("NotFaithful: density matrix is not positive definite (min/max eigenvalue ratio {ratio:e})")]
    NotFaithful { ratio: f64 },

    #[error("NotUnital: ||Phi(I) - I|| = {residual:e}")]
    NotUnital { residual: f64 },

    #[error("NotCP: Choi matrix has eigenvalue {min_eigenvalue:e}")]
    NotCp { min_eigenvalue: f64 },

    #[error("NotSchwarz: Phi(a*a) - Phi(a*)Phi(a) has eigenvalue {min_eigenvalue:e}")]
    NotSchwarz { min_eigenvalue: f64 },

    #[error("NotInvariantState: ||Phi_*(rho) - rho|| = {residual:e}")]
    NotInvariantState { residual: f64 },

    #[error("NoModularCommutation: {detail} (residual {residual:e})")]
    NoModularCommutation { detail: String, residual: f64 },

    #[error("precondition violated: {0}")]
    PreconditionViolated(String),

    #[error("not a *-subalgebra: {property} residual {residual:e}")]
    NotAnAlgebra { property: &'static str, residual: f64 },

    #[error("certificate failed: {what} (residual {residual:e})")]
    CertificateFailure { what: String, residual: f64 },

    #[error("StabilizationFailure: {what} did not stabilize within {cap} steps")]
    StabilizationFailure { what: &'static str, cap: usize },

    #[error("CoreMismatch: D_infinity and multiplicative core differ by {distance:e}")]
    CoreMismatch { distance: f64 },

    #[error("ModularInvarianceFailure: {property} residual {residual:e}")]
    ModularInvarianceFailure { property: &'static str, residual: f64 },

    #[error("mismatched expectation target (residual {residual:e})")]
    MismatchedTarget { residual: f64 },

    #[error("DegenerateRandomElement: block structure undetermined after {attempts} draws")]
    DegenerateRandomElement { attempts: usize },

    #[error("NotContraction: operator norm {norm}")]
    NotContraction { norm: f64 },

    #[error("ConvergenceFailure: {what} residual {residual:e} after {iterations} iterations")]
    ConvergenceFailure {
        what: &'static str,
        residual: f64,
        iterations: usize,
    },

    #[error("H0Mismatch: defect-kernel and domain-closure routes differ by {distance:e}")]
    H0Mismatch { distance: f64 },

    #[error("ReversiblePartMismatch: {0}")]
    ReversiblePartMismatch(String),

    #[error("InvalidParams: {0}")]
    InvalidParams(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    /// True when the error rejects one of the standing hypotheses of a
    /// quantum dynamical system.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::NotFaithful { .. }
                | Error::NotUnital { .. }
                | Error::NotCp { .. }
                | Error::NotSchwarz { .. }
                | Error::NotInvariantState { .. }
                | Error::NoModularCommutation { .. }
                | Error::InvalidState(_)
                | Error::DimensionMismatch { .. }
        )
    }
}

impl Error {
    /// Variant name, stable across releases; used in report diagnostics.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::NonFinite => "NonFinite",
            Error::InvalidTolerance(_) => "InvalidTolerance",
            Error::InvalidState(_) => "InvalidState",
            Error::NotFaithful { .. } => "NotFaithful",
            Error::NotUnital { .. } => "NotUnital",
            Error::NotCp { .. } => "NotCP",
            Error::NotSchwarz { .. } => "NotSchwarz",
            Error::NotInvariantState { .. } => "NotInvariantState",
            Error::NoModularCommutation { .. } => "NoModularCommutation",
            Error::PreconditionViolated(_) => "PreconditionViolated",
            Error::NotAnAlgebra { .. } => "NotAnAlgebra",
            Error::CertificateFailure { .. } => "CertificateFailure",
            Error::StabilizationFailure { .. } => "StabilizationFailure",
            Error::CoreMismatch { .. } => "CoreMismatch",
            Error::ModularInvarianceFailure { .. } => "ModularInvarianceFailure",
            Error::MismatchedTarget { .. } => "MismatchedTarget",
            Error::DegenerateRandomElement { .. } => "DegenerateRandomElement",
            Error::NotContraction { .. } => "NotContraction",
            Error::ConvergenceFailure { .. } => "ConvergenceFailure",
            Error::H0Mismatch { .. } => "H0Mismatch",
            Error::ReversiblePartMismatch(_) => "ReversiblePartMismatch",
            Error::InvalidParams(_) => "InvalidParams",
            Error::Schema(_) => "Schema",
            Error::Io(_) => "Io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Schema(e.to_string())
    }
}
