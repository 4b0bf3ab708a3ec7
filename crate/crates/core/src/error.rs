use num_complex::Complex64;
use thiserror::Error;

/// Crate-wide error type. Variants carry enough context to report which
/// numerical precondition failed and with what data.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid operator: {reason}")]
    InvalidOperator { reason: String },

    #[error("resolvent point {lambda} lies within tolerance of eigenvalue {eigenvalue}")]
    SingularResolvent {
        lambda: Complex64,
        eigenvalue: Complex64,
    },

    #[error("matrix exponential argument norm {norm:.3e} exceeds overflow cap {cap:.3e}")]
    ExpOverflow { norm: f64, cap: f64 },

    #[error("eigenvalue iteration failed to converge for a {dim}x{dim} matrix")]
    SpectrumFailure { dim: usize },

    #[error("fractional power undefined: eigenvalue {eigenvalue} touches the branch cut (-inf, 0]")]
    BranchCutViolation { eigenvalue: Complex64 },

    #[error("fractional exponent {alpha} outside (0, 1]")]
    InvalidExponent { alpha: f64 },

    #[error("estimate did not converge: {detail}")]
    InconclusiveVerification { detail: String },

    #[error("class-P quadrature did not reach tolerance {tol:.3e} (error estimate {err:.3e})")]
    DivergentClassP { tol: f64, err: f64 },

    #[error("system is not hyperbolic (spectral gap {gap:.3e} below {gap_tol:.3e})")]
    NotHyperbolic { gap: f64, gap_tol: f64 },

    #[error("contour projection deviates from ordered-Schur projection by {deviation:.3e} (tol {tol:.3e})")]
    ProjectionMismatch { deviation: f64, tol: f64 },

    #[error("resolvent parameter {lambda} too small: contraction bound {bound:.3e} >= 1")]
    LambdaTooSmall { lambda: Complex64, bound: f64 },

    #[error("root-finding contour failed: {detail}")]
    ContourFailure { detail: String },

    #[error("discretization meshes differ: {detail}")]
    MeshMismatch { detail: String },

    #[error("discretized dimension {dim} exceeds cap {cap}")]
    TooLarge { dim: usize, cap: usize },

    #[error("invalid perturbation: {reason}")]
    InvalidPerturbation { reason: String },

    #[error("base system is not hyperbolic; perturbation sweep undefined")]
    BaseNotHyperbolic,

    #[error("modal verdict disagrees with characteristic-root scan: {detail}")]
    DiscretizationInconsistency { detail: String },

    #[error("bad input: {reason}")]
    BadInput { reason: String },
}

impl Error {
    pub fn invalid_operator(reason: impl Into<String>) -> Self {
        Error::InvalidOperator {
            reason: reason.into(),
        }
    }

    pub fn bad_input(reason: impl Into<String>) -> Self {
        Error::BadInput {
            reason: reason.into(),
        }
    }

    /// Process exit code for CLI reporting: 3 for numerical inconclusiveness,
    /// 2 for a failed verification precondition, 4 for malformed input.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InconclusiveVerification { .. }
            | Error::DivergentClassP { .. }
            | Error::SpectrumFailure { .. }
            | Error::ProjectionMismatch { .. }
            | Error::ContourFailure { .. }
            | Error::DiscretizationInconsistency { .. } => 3,
            Error::NotHyperbolic { .. } | Error::BaseNotHyperbolic => 2,
            _ => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
