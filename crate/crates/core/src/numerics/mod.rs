//! Deterministic scalar and matrix kernels.
//!
//! Everything here is plain `f64` with explicit error reporting; no global
//! state, no hidden tolerances.  The special functions are implemented to
//! noticeably tighter accuracy than the rest of the crate needs, so that
//! simulator and likelihood errors are never dominated by the kernels.

mod dlaplace;
mod linalg;
mod rng;
mod special;

pub use dlaplace::DeltaLaplace;
pub use linalg::{cholesky, cholesky_psd, forward_solve, Matrix};
pub(crate) use linalg::dot;
pub(crate) use special::SQRT_2PI;
pub use rng::RngStream;
pub use special::{
    bessel_k, bessel_k_scaled, erf, erfc, gamma_quantile, log_gamma, lower_incomplete_gamma,
    matern_cov, reg_lower_gamma, std_normal_cdf, std_normal_pdf, std_normal_quantile,
};

/// Errors raised by the numeric kernels.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NumericsError {
    /// Argument outside the function's domain.
    #[error("{func}: {message}")]
    Domain {
        func: &'static str,
        message: String,
    },
    /// An iterative scheme ran out of iterations.
    #[error("{func}: iteration failed to converge")]
    NoConvergence { func: &'static str },
    /// Cholesky pivot failure; `pivot` is the 1-based diagonal index.
    #[error("matrix is not positive definite (pivot {pivot})")]
    NotPositiveDefinite { pivot: usize },
    /// Zero diagonal met while solving a triangular system (0-based index).
    #[error("triangular system is singular at diagonal {index}")]
    SingularDiagonal { index: usize },
    /// Incompatible shapes.
    #[error("dimension mismatch: {message}")]
    Dimension { message: String },
    /// A matrix constructor was handed NaN or infinite entries.
    #[error("matrix entries must be finite")]
    NonFinite,
    /// A routine requiring symmetry detected an asymmetric input.
    #[error("matrix is not symmetric within tolerance {tol:e}")]
    NotSymmetric { tol: f64 },
}

pub(crate) fn domain(func: &'static str, message: impl Into<String>) -> NumericsError {
    NumericsError::Domain {
        func,
        message: message.into(),
    }
}
