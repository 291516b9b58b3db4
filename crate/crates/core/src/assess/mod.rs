//! Estimator assessment: risk comparisons on shared data, sampling
//! distributions for a fixed parameter and block-bootstrap intervals.

use crate::models::ReplicateSet;
use crate::network::{DeepSetsEstimator, PiecewiseEstimator};

use thiserror::Error;

mod baselines;
mod bootstrap;
mod distribution;
mod risk;

pub use baselines::{ConstantEstimator, MapEstimator, OneAtATimeEstimator, OracleEstimator};
pub use bootstrap::{block_bootstrap, bootstrap_ci, BootstrapResult, DEFAULT_RESAMPLES};
pub use distribution::sampling_distribution;
pub use risk::{evaluate_risk, RiskReport, RiskRow};

/// Errors raised while evaluating estimators.
#[derive(Debug, Error)]
pub enum AssessError {
    #[error(transparent)]
    Model(#[from] crate::models::ModelError),
    #[error(transparent)]
    Network(#[from] crate::network::NetworkError),
    #[error(transparent)]
    Likelihood(#[from] crate::likelihood::LikelihoodError),
    /// An estimator failed on a particular data set.
    #[error("estimator: {0}")]
    Estimator(String),
    /// An assessment request is out of range or inconsistent.
    #[error("assessment: {0}")]
    Invalid(String),
}

/// Anything that maps a replicate set to a parameter estimate.
pub trait Estimator {
    fn estimate(&self, rs: &ReplicateSet) -> Result<Vec<f64>, AssessError>;

    /// Benchmarking hook: estimators that need a starting point, such as
    /// likelihood optimisers initialised at the generating parameter, may
    /// use the truth.  The default ignores it.
    fn estimate_with_truth(
        &self,
        rs: &ReplicateSet,
        _truth: &[f64],
    ) -> Result<Vec<f64>, AssessError> {
        self.estimate(rs)
    }
}

impl Estimator for DeepSetsEstimator {
    fn estimate(&self, rs: &ReplicateSet) -> Result<Vec<f64>, AssessError> {
        DeepSetsEstimator::estimate(self, rs).map_err(AssessError::from)
    }
}

impl Estimator for PiecewiseEstimator {
    fn estimate(&self, rs: &ReplicateSet) -> Result<Vec<f64>, AssessError> {
        PiecewiseEstimator::estimate(self, rs).map_err(AssessError::from)
    }
}
