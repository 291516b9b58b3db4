//! Mean-zero Gaussian process with Matern covariance and measurement noise.

use crate::numerics::{cholesky, matern_cov, Matrix, RngStream};

use super::{
    check_theta_len, model_id, DataModel, Marginal, ModelError, PreparedSimulator, Prior,
    SpatialDomain,
};

/// Observations z_i = L w_i + eps_i where L is the Cholesky factor of the
/// unit-variance Matern covariance over the domain and eps_i is independent
/// N(0, sigma_eps^2 I) noise. Parameters (sigma_eps, rho, nu), or
/// (sigma_eps, rho) when the smoothness is fixed.
#[derive(Debug, Clone)]
pub struct GaussianProcess {
    domain: SpatialDomain,
    prior: Prior,
    fixed_nu: Option<f64>,
}

impl GaussianProcess {
    pub fn new(domain: SpatialDomain, prior: Prior) -> Result<Self, ModelError> {
        if prior.dim() != 3 {
            return Err(ModelError::Parameter(format!(
                "gp prior must cover (sigma_eps, rho, nu), got {} marginals",
                prior.dim()
            )));
        }
        Ok(GaussianProcess { domain, prior, fixed_nu: None })
    }

    /// Variant with the smoothness fixed; estimable parameters are then
    /// (sigma_eps, rho).
    pub fn with_known_smoothness(
        domain: SpatialDomain,
        prior: Prior,
        nu: f64,
    ) -> Result<Self, ModelError> {
        if prior.dim() != 2 {
            return Err(ModelError::Parameter(format!(
                "known-smoothness gp prior must cover (sigma_eps, rho), got {} marginals",
                prior.dim()
            )));
        }
        if !(nu > 0.0) || !nu.is_finite() {
            return Err(ModelError::Parameter(format!("smoothness must be positive, got {nu}")));
        }
        Ok(GaussianProcess { domain, prior, fixed_nu: Some(nu) })
    }

    pub fn default_model() -> Self {
        GaussianProcess::new(
            SpatialDomain::unit_grid(8, 8),
            Prior::new(vec![
                Marginal::Uniform { lo: 0.1, hi: 1.0 },
                Marginal::Uniform { lo: 2.0, hi: 10.0 },
                Marginal::Uniform { lo: 0.5, hi: 3.0 },
            ])
            .unwrap(),
        )
        .unwrap()
    }

    pub fn known_smoothness_default() -> Self {
        GaussianProcess::with_known_smoothness(
            SpatialDomain::unit_grid(8, 8),
            Prior::new(vec![
                Marginal::Uniform { lo: 0.001, hi: 1.5 },
                Marginal::Uniform { lo: 1.0, hi: 30.0 },
            ])
            .unwrap(),
            1.0,
        )
        .unwrap()
    }

    pub fn domain(&self) -> &SpatialDomain {
        &self.domain
    }

    fn unpack(&self, theta: &[f64]) -> Result<(f64, f64, f64), ModelError> {
        check_theta_len(self.name(), theta, self.parameter_count())?;
        let (sigma_eps, rho, nu) = match self.fixed_nu {
            Some(nu) => (theta[0], theta[1], nu),
            None => (theta[0], theta[1], theta[2]),
        };
        if sigma_eps < 0.0 {
            return Err(ModelError::Parameter(format!(
                "noise std must be nonnegative, got {sigma_eps}"
            )));
        }
        if !(rho > 0.0) || !(nu > 0.0) {
            return Err(ModelError::Parameter(format!(
                "range and smoothness must be positive, got rho={rho}, nu={nu}"
            )));
        }
        Ok((sigma_eps, rho, nu))
    }
}

/// Unit-variance Matern covariance matrix over a domain.
pub(crate) fn matern_matrix(
    domain: &SpatialDomain,
    rho: f64,
    nu: f64,
) -> Result<Matrix, ModelError> {
    let n = domain.len();
    let mut c = Matrix::zeros(n, n);
    for i in 0..n {
        c.set(i, i, 1.0);
        for j in 0..i {
            let v = matern_cov(domain.distance(i, j), 1.0, rho, nu)?;
            c.set(i, j, v);
            c.set(j, i, v);
        }
    }
    Ok(c)
}

/// Lower-triangular product y = L w for a Cholesky factor.
pub(crate) fn lower_tri_matvec(l: &Matrix, w: &[f64], y: &mut [f64]) {
    let n = l.rows();
    debug_assert_eq!(w.len(), n);
    debug_assert_eq!(y.len(), n);
    // Walk rows backwards so y may alias a prefix-filled buffer safely.
    for i in (0..n).rev() {
        y[i] = crate::numerics::dot(&l.row(i)[..=i], &w[..=i]);
    }
}

impl DataModel for GaussianProcess {
    fn name(&self) -> &'static str {
        if self.fixed_nu.is_some() {
            "gp_known_smoothness"
        } else {
            "gp"
        }
    }

    fn model_id(&self) -> u16 {
        model_id::GAUSSIAN_PROCESS
    }

    fn parameter_names(&self) -> &'static [&'static str] {
        if self.fixed_nu.is_some() {
            &["sigma_eps", "rho"]
        } else {
            &["sigma_eps", "rho", "nu"]
        }
    }

    fn prior(&self) -> &Prior {
        &self.prior
    }

    fn replicate_dim(&self) -> usize {
        self.domain.len()
    }

    fn prepare(&self, theta: &[f64]) -> Result<Box<dyn PreparedSimulator + '_>, ModelError> {
        let (sigma_eps, rho, nu) = self.unpack(theta)?;
        let c = matern_matrix(&self.domain, rho, nu)?;
        // Strict factorisation: duplicate locations make C singular and fail here.
        let l = cholesky(&c)?;
        Ok(Box::new(PreparedGp { l, sigma_eps }))
    }
}

struct PreparedGp {
    l: Matrix,
    sigma_eps: f64,
}

impl PreparedSimulator for PreparedGp {
    fn simulate_into(
        &self,
        out: &mut [f64],
        m: usize,
        rng: &mut RngStream,
    ) -> Result<(), ModelError> {
        let n = self.l.rows();
        debug_assert_eq!(out.len(), n * m);
        let mut w = vec![0.0; n];
        for rep in out.chunks_exact_mut(n) {
            for v in w.iter_mut() {
                *v = rng.std_normal();
            }
            lower_tri_matvec(&self.l, &w, rep);
            if self.sigma_eps > 0.0 {
                for v in rep.iter_mut() {
                    *v += self.sigma_eps * rng.std_normal();
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn point_domain(points: &[[f64; 2]]) -> SpatialDomain {
        SpatialDomain::new(points.to_vec(), None).unwrap()
    }

    fn three_param_model(points: &[[f64; 2]]) -> GaussianProcess {
        GaussianProcess::new(
            point_domain(points),
            Prior::new(vec![
                Marginal::Uniform { lo: 0.1, hi: 1.0 },
                Marginal::Uniform { lo: 2.0, hi: 10.0 },
                Marginal::Uniform { lo: 0.5, hi: 3.0 },
            ])
            .unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn single_site_variance_is_signal_plus_noise() {
        // Var(z) = 1 + sigma_eps^2 = 1.25 at sigma_eps = 0.5.
        let model = three_param_model(&[[0.0, 0.0]]);
        let rs = model
            .simulate(&[0.5, 2.0, 1.0], 100_000, &mut RngStream::new(12, 0))
            .unwrap();
        let k = rs.data().len() as f64;
        let mean: f64 = rs.data().iter().sum::<f64>() / k;
        let var: f64 =
            rs.data().iter().map(|z| (z - mean) * (z - mean)).sum::<f64>() / (k - 1.0);
        assert!((var - 1.25).abs() < 0.03, "sample variance {var}");
        // Empirical mean within four standard errors of zero.
        let se = (1.25f64 / k).sqrt();
        assert!(mean.abs() < 4.0 * se, "mean {mean} vs se {se}");
    }

    #[test]
    fn lag_one_covariance_matches_matern_closed_form() {
        // nu = 1/2 gives C(h) = exp(-h/rho); nugget does not enter cross terms.
        let model = three_param_model(&[[0.0, 0.0], [1.0, 0.0]]);
        let rs = model
            .simulate(&[0.3, 2.0, 0.5], 100_000, &mut RngStream::new(13, 0))
            .unwrap();
        let mut acc = 0.0;
        for rep in rs.replicates() {
            acc += rep[0] * rep[1];
        }
        let cov = acc / rs.m() as f64;
        let expected = (-0.5f64).exp();
        assert!((cov - expected).abs() < 0.02, "lag-1 covariance {cov} vs {expected}");
    }

    #[test]
    fn fixed_seed_reruns_bit_identically() {
        let model = three_param_model(&[[0.0, 0.0], [1.0, 0.5], [0.3, 2.0]]);
        let a = model
            .simulate(&[0.5, 3.0, 1.5], 50, &mut RngStream::new(14, 2))
            .unwrap();
        let b = model
            .simulate(&[0.5, 3.0, 1.5], 50, &mut RngStream::new(14, 2))
            .unwrap();
        for (x, y) in a.data().iter().zip(b.data()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn duplicate_locations_fail_the_factorisation() {
        let model = three_param_model(&[[0.0, 0.0], [0.0, 0.0]]);
        let err = model
            .simulate(&[0.0, 2.0, 1.0], 1, &mut RngStream::new(0, 0))
            .unwrap_err();
        assert!(matches!(err, ModelError::Numerics(_)), "got {err:?}");
    }

    #[test]
    fn known_smoothness_variant_matches_full_model_at_fixed_nu() {
        let domain = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let full = three_param_model(&domain);
        let fixed = GaussianProcess::with_known_smoothness(
            point_domain(&domain),
            Prior::new(vec![
                Marginal::Uniform { lo: 0.001, hi: 1.5 },
                Marginal::Uniform { lo: 1.0, hi: 30.0 },
            ])
            .unwrap(),
            1.0,
        )
        .unwrap();
        assert_eq!(fixed.parameter_names(), &["sigma_eps", "rho"]);
        let a = full
            .simulate(&[0.5, 5.0, 1.0], 20, &mut RngStream::new(15, 0))
            .unwrap();
        let b = fixed
            .simulate(&[0.5, 5.0], 20, &mut RngStream::new(15, 0))
            .unwrap();
        for (x, y) in a.data().iter().zip(b.data()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn parameter_validation() {
        let model = three_param_model(&[[0.0, 0.0]]);
        let mut rng = RngStream::new(0, 0);
        assert!(model.simulate(&[-0.1, 2.0, 1.0], 1, &mut rng).is_err());
        assert!(model.simulate(&[0.1, 0.0, 1.0], 1, &mut rng).is_err());
        assert!(model.simulate(&[0.1, 2.0], 1, &mut rng).is_err());
    }
}
