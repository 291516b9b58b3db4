//! Statistical models: priors, exact simulators, data transforms, and
//! closed-form reference estimators.
//!
//! Every model implements [`DataModel`], which couples a prior over the
//! parameter vector with a simulator producing [`ReplicateSet`]s of
//! conditionally i.i.d. replicates. Per-parameter setup (covariance
//! factorisations and the like) happens once in [`DataModel::prepare`] and is
//! reused across replicates. Simulators are pure functions of
//! (parameters, domain, sample size, RNG stream); callers parallelise by
//! assigning one stream per parameter vector.

mod cond_ext;
mod domain;
mod gp;
mod oracle;
mod prior;
mod replicate;
mod schlather;
mod toy;

pub use cond_ext::CondExtremes;
pub use domain::SpatialDomain;
pub use gp::GaussianProcess;
pub(crate) use gp::matern_matrix;
pub use oracle::{closed_form_bayes, one_at_a_time};
pub use prior::{sample_prior, Marginal, ParameterSample, Prior};
pub use replicate::{ReplicateSet, Transform};
pub use schlather::Schlather;
pub use toy::{LinearRegression, NormalVariance, UniformTheta};

use crate::numerics::{NumericsError, RngStream};

/// Stable model identifiers written to the binary container header.
pub mod model_id {
    pub const CUSTOM: u16 = 0;
    pub const UNIFORM_THETA: u16 = 1;
    pub const NORMAL_VARIANCE: u16 = 2;
    pub const LINEAR_REGRESSION: u16 = 3;
    pub const GAUSSIAN_PROCESS: u16 = 4;
    pub const SCHLATHER: u16 = 5;
    pub const COND_EXTREMES: u16 = 6;
}

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("invalid domain: {0}")]
    Domain(String),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("replicate {replicate}: spectral function cap {cap} exceeded")]
    IterationCap { replicate: usize, cap: usize },
    #[error("{model} has no closed-form Bayes estimator under this prior (expected {expected})")]
    NonConjugate {
        model: &'static str,
        expected: &'static str,
    },
    #[error("transform: {0}")]
    Transform(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("container format: {0}")]
    Format(String),
}

/// A statistical model paired with its prior: the unit of work for training
/// and assessment.
pub trait DataModel {
    fn name(&self) -> &'static str;
    fn model_id(&self) -> u16;
    fn parameter_names(&self) -> &'static [&'static str];
    fn prior(&self) -> &Prior;

    /// Dimension of a single replicate.
    fn replicate_dim(&self) -> usize;

    /// Transform applied to the data before it reaches an estimator.
    fn default_transform(&self) -> Transform {
        Transform::None
    }

    /// Per-parameter setup, done once and reused for every replicate drawn at
    /// this parameter vector.
    fn prepare(&self, theta: &[f64]) -> Result<Box<dyn PreparedSimulator + '_>, ModelError>;

    fn parameter_count(&self) -> usize {
        self.parameter_names().len()
    }

    fn simulate(
        &self,
        theta: &[f64],
        m: usize,
        rng: &mut RngStream,
    ) -> Result<ReplicateSet, ModelError> {
        let sim = self.prepare(theta)?;
        let n = self.replicate_dim();
        let mut data = vec![0.0; n * m];
        sim.simulate_into(&mut data, m, rng)?;
        ReplicateSet::new(n, m, data, self.model_id())
    }
}

/// Simulator specialised to one parameter vector.
pub trait PreparedSimulator {
    /// Fills `out` (replicate-contiguous, length `replicate_dim * m`) with
    /// `m` fresh replicates.
    fn simulate_into(
        &self,
        out: &mut [f64],
        m: usize,
        rng: &mut RngStream,
    ) -> Result<(), ModelError>;
}

pub(crate) fn check_theta_len(
    model: &str,
    theta: &[f64],
    want: usize,
) -> Result<(), ModelError> {
    if theta.len() != want {
        return Err(ModelError::Parameter(format!(
            "{model} expects {want} parameters, got {}",
            theta.len()
        )));
    }
    if let Some(bad) = theta.iter().find(|v| !v.is_finite()) {
        return Err(ModelError::Parameter(format!(
            "{model}: non-finite parameter value {bad}"
        )));
    }
    Ok(())
}
