//! Exact Gaussian process log-likelihood.

use crate::likelihood::LikelihoodError;
use crate::models::{matern_matrix, ReplicateSet, SpatialDomain, Transform};
use crate::numerics::{cholesky, forward_solve, Matrix};

/// Factor of the observation covariance (unit-variance Matern plus nugget)
/// and the log-determinant term it carries.
fn factor(theta: &[f64], domain: &SpatialDomain) -> Result<(Matrix, f64), LikelihoodError> {
    let [sigma_eps, rho, nu] = *theta else {
        return Err(LikelihoodError::Domain(format!(
            "gaussian likelihood expects (sigma_eps, rho, nu), got {} parameters",
            theta.len()
        )));
    };
    if !sigma_eps.is_finite() || sigma_eps < 0.0 {
        return Err(LikelihoodError::Domain(format!(
            "noise standard deviation must be finite and nonnegative, got {sigma_eps}"
        )));
    }
    let mut sigma = matern_matrix(domain, rho, nu)?;
    for j in 0..domain.len() {
        sigma.set(j, j, sigma.get(j, j) + sigma_eps * sigma_eps);
    }
    let l = cholesky(&sigma)?;
    let half_log_det = (0..domain.len()).map(|j| l.get(j, j).ln()).sum();
    Ok((l, half_log_det))
}

fn loglik_with(l: &Matrix, half_log_det: f64, z: &[f64]) -> Result<f64, LikelihoodError> {
    let u = forward_solve(l, z)?;
    let quad: f64 = u.iter().map(|x| x * x).sum();
    let n = z.len() as f64;
    Ok(-0.5 * n * (2.0 * std::f64::consts::PI).ln() - half_log_det - 0.5 * quad)
}

/// Log-density of one mean-zero Gaussian replicate under the Matern-plus-
/// nugget covariance, evaluated through a Cholesky forward solve.
pub fn gp_loglik(
    theta: &[f64],
    z: &[f64],
    domain: &SpatialDomain,
) -> Result<f64, LikelihoodError> {
    if z.len() != domain.len() {
        return Err(LikelihoodError::Domain(format!(
            "replicate has {} values, domain has {} locations",
            z.len(),
            domain.len()
        )));
    }
    let (l, half_log_det) = factor(theta, domain)?;
    loglik_with(&l, half_log_det, z)
}

/// Joint log-likelihood of a replicate set: the covariance is factored once
/// and the independent per-replicate terms are summed.
pub fn gp_loglik_set(
    theta: &[f64],
    rs: &ReplicateSet,
    domain: &SpatialDomain,
) -> Result<f64, LikelihoodError> {
    if rs.n() != domain.len() {
        return Err(LikelihoodError::Domain(format!(
            "replicates have {} values, domain has {} locations",
            rs.n(),
            domain.len()
        )));
    }
    if rs.transform_tag() != Transform::None {
        return Err(LikelihoodError::Domain(
            "gaussian likelihood needs data on the original scale".into(),
        ));
    }
    let (l, half_log_det) = factor(theta, domain)?;
    let mut total = 0.0;
    for z in rs.replicates() {
        total += loglik_with(&l, half_log_det, z)?;
    }
    Ok(total)
}
