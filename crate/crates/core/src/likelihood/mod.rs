//! Likelihood-based reference estimators.
//!
//! The Gaussian process gets its exact log-likelihood through one Cholesky
//! factorisation per parameter vector. The max-stable process has no
//! tractable full likelihood, so it gets a composite one: the sum of
//! closed-form bivariate log-densities over location pairs within a cutoff
//! distance. Both feed a bounded Nelder-Mead maximiser for posterior-mode
//! estimates.

mod gaussian;
mod map;
mod optim;
mod pairwise;

pub use gaussian::{gp_loglik, gp_loglik_set};
pub use map::{map_estimate, MapProblem};
pub use optim::{nelder_mead, NelderMeadConfig};
pub use pairwise::{
    pairwise_loglik, schlather_bivariate_logdensity, schlather_exponent, BivariatePair,
    DEFAULT_CUTOFF,
};

use thiserror::Error;

/// Errors raised while evaluating or maximising likelihoods.
#[derive(Debug, Error)]
pub enum LikelihoodError {
    /// An argument is outside the function's domain.
    #[error("domain: {0}")]
    Domain(String),
    /// No location pair lies within the cutoff distance.
    #[error("no location pairs within cutoff distance {cutoff}")]
    NoPairs { cutoff: f64 },
    /// The bivariate density bracket came out nonpositive, which signals
    /// numerical breakdown rather than a legal density value.
    #[error("nonpositive density bracket {value}")]
    DensityBracket { value: f64 },
    #[error(transparent)]
    Numerics(#[from] crate::numerics::NumericsError),
    #[error(transparent)]
    Model(#[from] crate::models::ModelError),
}
