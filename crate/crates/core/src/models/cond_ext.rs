//! Spatial conditional extremes model: the process given an exceedance of a
//! threshold at a conditioning site.

use crate::numerics::{cholesky, std_normal_cdf, DeltaLaplace, Matrix, RngStream};

use super::gp::{lower_tri_matvec, matern_matrix};
use super::{
    check_theta_len, model_id, DataModel, Marginal, ModelError, PreparedSimulator, Prior,
    SpatialDomain, Transform,
};

/// Z_j | Z_0 > u = a(h_j, Z_0) + b(h_j, Z_0) Y(s_j), with
/// a(h, z) = z exp{-(|h|/lambda)^kappa}, b(h, z) = 1 + a(h, z)^beta, the
/// exceedance Z_0 - u unit exponential, and the residual Y built from a
/// unit-variance Matern Gaussian process transformed marginally to a
/// delta-Laplace scale whose shape decays from 2 at the conditioning site
/// towards 1 far away. Parameters
/// (kappa, lambda, beta, mu, tau, delta1, rho, nu).
#[derive(Debug, Clone)]
pub struct CondExtremes {
    domain: SpatialDomain,
    prior: Prior,
    threshold: f64,
}

pub(crate) const PARAM_NAMES: [&str; 8] = [
    "kappa", "lambda", "beta", "mu", "tau", "delta1", "rho", "nu",
];

impl CondExtremes {
    pub fn new(domain: SpatialDomain, prior: Prior, threshold: f64) -> Result<Self, ModelError> {
        if domain.s0().is_none() {
            return Err(ModelError::Domain(
                "conditional extremes requires a conditioning site".into(),
            ));
        }
        if prior.dim() != PARAM_NAMES.len() {
            return Err(ModelError::Parameter(format!(
                "conditional extremes prior must cover {} parameters, got {}",
                PARAM_NAMES.len(),
                prior.dim()
            )));
        }
        if !threshold.is_finite() {
            return Err(ModelError::Parameter(format!(
                "threshold must be finite, got {threshold}"
            )));
        }
        Ok(CondExtremes { domain, prior, threshold })
    }

    /// Default threshold: the 0.975 quantile of the unit Laplace
    /// distribution, -ln(2 * 0.025).
    pub fn default_threshold() -> f64 {
        -(0.05f64).ln()
    }

    pub fn default_model() -> Self {
        CondExtremes::new(
            SpatialDomain::default_grid(),
            Prior::new(vec![
                Marginal::Uniform { lo: 1.0, hi: 2.0 },   // kappa
                Marginal::Uniform { lo: 2.0, hi: 5.0 },   // lambda
                Marginal::Uniform { lo: 0.05, hi: 1.0 },  // beta
                Marginal::Uniform { lo: -0.5, hi: 0.5 },  // mu
                Marginal::Uniform { lo: 0.3, hi: 0.9 },   // tau
                Marginal::Uniform { lo: 1.3, hi: 3.0 },   // delta1
                Marginal::Uniform { lo: 2.0, hi: 10.0 },  // rho
                Marginal::Uniform { lo: 0.5, hi: 3.0 },   // nu
            ])
            .unwrap(),
            CondExtremes::default_threshold(),
        )
        .unwrap()
    }

    pub fn domain(&self) -> &SpatialDomain {
        &self.domain
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    fn distances_from_s0(&self) -> (usize, Vec<f64>) {
        let s0 = self.domain.s0().expect("validated in new");
        let h = (0..self.domain.len())
            .map(|j| self.domain.distance(s0, j))
            .collect();
        (s0, h)
    }

    /// Shape profile delta(h) = 1 + exp{-(h/delta1)^2}: equal to 2 at the
    /// conditioning site, decaying towards 1 with distance.
    pub fn shape_profile(&self, delta1: f64) -> Vec<f64> {
        let (_, h) = self.distances_from_s0();
        h.iter().map(|h| 1.0 + (-(h / delta1).powi(2)).exp()).collect()
    }

    /// Residual standard deviation sigma0(h) = sqrt(2 - 2 C(h)) of the
    /// increment process; exactly zero at the conditioning site.
    pub fn residual_sd_profile(&self, rho: f64, nu: f64) -> Result<Vec<f64>, ModelError> {
        let (_, h) = self.distances_from_s0();
        h.iter()
            .map(|h| {
                let c = crate::numerics::matern_cov(*h, 1.0, rho, nu)?;
                Ok((2.0 - 2.0 * c).max(0.0).sqrt())
            })
            .collect()
    }
}

impl DataModel for CondExtremes {
    fn name(&self) -> &'static str {
        "cond_ext"
    }

    fn model_id(&self) -> u16 {
        model_id::COND_EXTREMES
    }

    fn parameter_names(&self) -> &'static [&'static str] {
        &PARAM_NAMES
    }

    fn prior(&self) -> &Prior {
        &self.prior
    }

    fn replicate_dim(&self) -> usize {
        self.domain.len()
    }

    fn default_transform(&self) -> Transform {
        Transform::CubeRoot
    }

    fn prepare(&self, theta: &[f64]) -> Result<Box<dyn PreparedSimulator + '_>, ModelError> {
        check_theta_len("cond_ext", theta, PARAM_NAMES.len())?;
        let [kappa, lambda, beta, mu, tau, delta1, rho, nu] =
            <[f64; 8]>::try_from(theta).expect("length checked");
        for (name, v) in PARAM_NAMES.iter().zip(theta) {
            // mu is the only sign-free parameter.
            if *name != "mu" && !(*v > 0.0) {
                return Err(ModelError::Parameter(format!(
                    "cond_ext requires {name} > 0, got {v}"
                )));
            }
        }

        let (s0, h) = self.distances_from_s0();
        let c = matern_matrix(&self.domain, rho, nu)?;
        let l = cholesky(&c)?;
        let mut decay = Vec::with_capacity(h.len());
        let mut sigma0 = Vec::with_capacity(h.len());
        let mut margins = Vec::with_capacity(h.len());
        for (j, hj) in h.iter().enumerate() {
            decay.push((-(hj / lambda).powf(kappa)).exp());
            let cj = c.get(s0, j);
            sigma0.push((2.0 - 2.0 * cj).max(0.0).sqrt());
            let delta_j = 1.0 + (-(hj / delta1).powi(2)).exp();
            margins.push(DeltaLaplace::new(mu, tau, delta_j)?);
        }
        Ok(Box::new(PreparedCondExt {
            l,
            s0,
            threshold: self.threshold,
            beta,
            decay,
            sigma0,
            margins,
        }))
    }
}

struct PreparedCondExt {
    l: Matrix,
    s0: usize,
    threshold: f64,
    beta: f64,
    decay: Vec<f64>,
    sigma0: Vec<f64>,
    margins: Vec<DeltaLaplace>,
}

impl PreparedSimulator for PreparedCondExt {
    fn simulate_into(
        &self,
        out: &mut [f64],
        m: usize,
        rng: &mut RngStream,
    ) -> Result<(), ModelError> {
        let n = self.l.rows();
        debug_assert_eq!(out.len(), n * m);
        let mut w = vec![0.0; n];
        let mut ytilde = vec![0.0; n];
        for rep in out.chunks_exact_mut(n) {
            let z0 = self.threshold + rng.exponential();
            for v in w.iter_mut() {
                *v = rng.std_normal();
            }
            lower_tri_matvec(&self.l, &w, &mut ytilde);
            let y0 = ytilde[self.s0];
            for j in 0..n {
                if j == self.s0 {
                    // The conditioning coordinate is the exceedance itself.
                    rep[j] = z0;
                    continue;
                }
                let standardised = (ytilde[j] - y0) / self.sigma0[j];
                // Clamp away exact 0/1, unreachable for any plausible draw.
                let p = std_normal_cdf(standardised).clamp(f64::MIN_POSITIVE, 1.0 - 1e-16);
                let y = self.margins[j].quantile(p)?;
                let a = z0 * self.decay[j];
                let b = 1.0 + a.powf(self.beta);
                rep[j] = a + b * y;
            }
        }
        Ok(())
    }
}
