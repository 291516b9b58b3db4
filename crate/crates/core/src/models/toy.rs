//! Analytically tractable models used to benchmark neural estimators against
//! exact Bayes estimators.

use crate::numerics::RngStream;

use super::{
    check_theta_len, model_id, DataModel, ModelError, Marginal, PreparedSimulator, Prior,
};

/// Scalar observations uniform on [0, theta] with a conjugate Pareto prior.
#[derive(Debug, Clone)]
pub struct UniformTheta {
    prior: Prior,
}

impl UniformTheta {
    /// Prior must be a single Pareto marginal.
    pub fn new(prior: Prior) -> Result<Self, ModelError> {
        match prior.marginals() {
            [Marginal::Pareto { .. }] => Ok(UniformTheta { prior }),
            _ => Err(ModelError::NonConjugate {
                model: "uniform_theta",
                expected: "a single Pareto marginal",
            }),
        }
    }

    pub fn default_model() -> Self {
        UniformTheta::new(
            Prior::new(vec![Marginal::Pareto { shape: 4.0, scale: 1.0 }]).unwrap(),
        )
        .unwrap()
    }

    pub fn shape_scale(&self) -> (f64, f64) {
        match self.prior.marginals() {
            [Marginal::Pareto { shape, scale }] => (*shape, *scale),
            _ => unreachable!("validated in new"),
        }
    }
}

impl DataModel for UniformTheta {
    fn name(&self) -> &'static str {
        "uniform_theta"
    }

    fn model_id(&self) -> u16 {
        model_id::UNIFORM_THETA
    }

    fn parameter_names(&self) -> &'static [&'static str] {
        &["theta"]
    }

    fn prior(&self) -> &Prior {
        &self.prior
    }

    fn replicate_dim(&self) -> usize {
        1
    }

    fn prepare(&self, theta: &[f64]) -> Result<Box<dyn PreparedSimulator + '_>, ModelError> {
        check_theta_len("uniform_theta", theta, 1)?;
        if theta[0] <= 0.0 {
            return Err(ModelError::Parameter(format!(
                "uniform_theta requires theta > 0, got {}",
                theta[0]
            )));
        }
        Ok(Box::new(PreparedUniform { theta: theta[0] }))
    }
}

struct PreparedUniform {
    theta: f64,
}

impl PreparedSimulator for PreparedUniform {
    fn simulate_into(
        &self,
        out: &mut [f64],
        m: usize,
        rng: &mut RngStream,
    ) -> Result<(), ModelError> {
        debug_assert_eq!(out.len(), m);
        for v in out.iter_mut() {
            *v = self.theta * rng.uniform01();
        }
        Ok(())
    }
}

/// Scalar mean-zero Gaussian observations with unknown variance theta and a
/// conjugate inverse-gamma prior.
#[derive(Debug, Clone)]
pub struct NormalVariance {
    prior: Prior,
}

impl NormalVariance {
    /// Prior must be a single inverse-gamma marginal.
    pub fn new(prior: Prior) -> Result<Self, ModelError> {
        match prior.marginals() {
            [Marginal::InverseGamma { .. }] => Ok(NormalVariance { prior }),
            _ => Err(ModelError::NonConjugate {
                model: "normal_variance",
                expected: "a single inverse-gamma marginal",
            }),
        }
    }

    pub fn default_model() -> Self {
        NormalVariance::new(
            Prior::new(vec![Marginal::InverseGamma { shape: 2.0, scale: 2.0 }]).unwrap(),
        )
        .unwrap()
    }

    pub fn shape_scale(&self) -> (f64, f64) {
        match self.prior.marginals() {
            [Marginal::InverseGamma { shape, scale }] => (*shape, *scale),
            _ => unreachable!("validated in new"),
        }
    }
}

impl DataModel for NormalVariance {
    fn name(&self) -> &'static str {
        "normal_variance"
    }

    fn model_id(&self) -> u16 {
        model_id::NORMAL_VARIANCE
    }

    fn parameter_names(&self) -> &'static [&'static str] {
        &["theta"]
    }

    fn prior(&self) -> &Prior {
        &self.prior
    }

    fn replicate_dim(&self) -> usize {
        1
    }

    fn prepare(&self, theta: &[f64]) -> Result<Box<dyn PreparedSimulator + '_>, ModelError> {
        check_theta_len("normal_variance", theta, 1)?;
        if theta[0] <= 0.0 {
            return Err(ModelError::Parameter(format!(
                "normal_variance requires theta > 0, got {}",
                theta[0]
            )));
        }
        Ok(Box::new(PreparedNormalVariance { sd: theta[0].sqrt() }))
    }
}

struct PreparedNormalVariance {
    sd: f64,
}

impl PreparedSimulator for PreparedNormalVariance {
    fn simulate_into(
        &self,
        out: &mut [f64],
        m: usize,
        rng: &mut RngStream,
    ) -> Result<(), ModelError> {
        debug_assert_eq!(out.len(), m);
        for v in out.iter_mut() {
            *v = self.sd * rng.std_normal();
        }
        Ok(())
    }
}

/// Linear model Z = X beta + eps with a fixed design (intercept plus one
/// covariate equally spaced in [-1, 1]), known noise scale, and a standard
/// Gaussian prior over beta. A replicate is the full n-vector Z.
#[derive(Debug, Clone)]
pub struct LinearRegression {
    prior: Prior,
    covariate: Vec<f64>,
    sigma: f64,
}

impl LinearRegression {
    pub fn new(n: usize, sigma: f64) -> Result<Self, ModelError> {
        if n < 2 {
            return Err(ModelError::Parameter(format!(
                "linear_regression requires n >= 2 design points, got {n}"
            )));
        }
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(ModelError::Parameter(format!(
                "linear_regression requires sigma > 0, got {sigma}"
            )));
        }
        let covariate = (0..n)
            .map(|i| -1.0 + 2.0 * i as f64 / (n - 1) as f64)
            .collect();
        Ok(LinearRegression {
            prior: Prior::new(vec![Marginal::StdNormal, Marginal::StdNormal]).unwrap(),
            covariate,
            sigma,
        })
    }

    pub fn default_model() -> Self {
        LinearRegression::new(100, 0.05).unwrap()
    }

    pub fn covariate(&self) -> &[f64] {
        &self.covariate
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Posterior mean of beta (equal to the componentwise median by the
    /// symmetry of the Gaussian posterior).
    pub fn posterior_mean(&self, rs: &super::ReplicateSet) -> Result<Vec<f64>, ModelError> {
        let n = self.covariate.len();
        if rs.n() != n {
            return Err(ModelError::Parameter(format!(
                "replicate dimension {} does not match the design ({n})",
                rs.n()
            )));
        }
        let m = rs.m() as f64;
        let sx: f64 = self.covariate.iter().sum();
        let sxx: f64 = self.covariate.iter().map(|x| x * x).sum();
        let mut sz = 0.0;
        let mut sxz = 0.0;
        for rep in rs.replicates() {
            for (x, z) in self.covariate.iter().zip(rep) {
                sz += z;
                sxz += x * z;
            }
        }
        let inv_s2 = 1.0 / (self.sigma * self.sigma);
        // Posterior precision I + (m / sigma^2) X'X and mean A^{-1} X'z / sigma^2.
        let a11 = 1.0 + m * inv_s2 * n as f64;
        let a12 = m * inv_s2 * sx;
        let a22 = 1.0 + m * inv_s2 * sxx;
        let b1 = inv_s2 * sz;
        let b2 = inv_s2 * sxz;
        let det = a11 * a22 - a12 * a12;
        Ok(vec![
            (a22 * b1 - a12 * b2) / det,
            (a11 * b2 - a12 * b1) / det,
        ])
    }
}

impl DataModel for LinearRegression {
    fn name(&self) -> &'static str {
        "linear_regression"
    }

    fn model_id(&self) -> u16 {
        model_id::LINEAR_REGRESSION
    }

    fn parameter_names(&self) -> &'static [&'static str] {
        &["beta0", "beta1"]
    }

    fn prior(&self) -> &Prior {
        &self.prior
    }

    fn replicate_dim(&self) -> usize {
        self.covariate.len()
    }

    fn prepare(&self, theta: &[f64]) -> Result<Box<dyn PreparedSimulator + '_>, ModelError> {
        check_theta_len("linear_regression", theta, 2)?;
        Ok(Box::new(PreparedLinReg {
            model: self,
            beta0: theta[0],
            beta1: theta[1],
        }))
    }
}

struct PreparedLinReg<'a> {
    model: &'a LinearRegression,
    beta0: f64,
    beta1: f64,
}

impl PreparedSimulator for PreparedLinReg<'_> {
    fn simulate_into(
        &self,
        out: &mut [f64],
        m: usize,
        rng: &mut RngStream,
    ) -> Result<(), ModelError> {
        let n = self.model.covariate.len();
        debug_assert_eq!(out.len(), n * m);
        for rep in out.chunks_exact_mut(n) {
            for (v, x) in rep.iter_mut().zip(&self.model.covariate) {
                *v = self.beta0 + self.beta1 * x + self.model.sigma * rng.std_normal();
            }
        }
        Ok(())
    }
}
