//! Posterior-mode estimation for models with a tractable likelihood.

use crate::models::ReplicateSet;

use super::optim::{nelder_mead, NelderMeadConfig};
use super::LikelihoodError;

/// A maximum a posteriori problem: a log-likelihood over whole replicate
/// sets, a log-prior density, and the box the estimate must stay inside.
///
/// The likelihood handle receives the full set so implementations can factor
/// shared structure once per parameter value instead of once per replicate.
pub struct MapProblem<'a> {
    loglik: Box<dyn Fn(&[f64], &ReplicateSet) -> Result<f64, LikelihoodError> + 'a>,
    log_prior: Box<dyn Fn(&[f64]) -> f64 + 'a>,
    bounds: Vec<(f64, f64)>,
}

impl<'a> MapProblem<'a> {
    pub fn new(
        loglik: impl Fn(&[f64], &ReplicateSet) -> Result<f64, LikelihoodError> + 'a,
        log_prior: impl Fn(&[f64]) -> f64 + 'a,
        bounds: Vec<(f64, f64)>,
    ) -> Result<Self, LikelihoodError> {
        if bounds.is_empty() {
            return Err(LikelihoodError::Domain(
                "a map problem needs at least one parameter".into(),
            ));
        }
        for (lo, hi) in &bounds {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(LikelihoodError::Domain(
                    "each parameter bound must be a finite interval with lo < hi".into(),
                ));
            }
        }
        Ok(MapProblem {
            loglik: Box::new(loglik),
            log_prior: Box::new(log_prior),
            bounds,
        })
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }
}

/// Maximises log-likelihood plus log-prior over the problem's box.
///
/// `init` must lie strictly inside the bounds.  A likelihood error during
/// the search is treated as an infinitely bad objective value, which steers
/// the simplex away from the offending region; an error at `init` itself is
/// reported to the caller.
pub fn map_estimate(
    problem: &MapProblem,
    rs: &ReplicateSet,
    init: &[f64],
) -> Result<Vec<f64>, LikelihoodError> {
    if init.len() != problem.bounds.len() {
        return Err(LikelihoodError::Domain(format!(
            "initial point has {} coordinates, bounds have {}",
            init.len(),
            problem.bounds.len()
        )));
    }
    let objective = |theta: &[f64]| match (problem.loglik)(theta, rs) {
        Ok(ll) => -(ll + (problem.log_prior)(theta)),
        Err(_) => f64::INFINITY,
    };
    let cfg = NelderMeadConfig::new(init.len()).with_bounds(problem.bounds.clone());
    let (theta, _) = nelder_mead(objective, init, &cfg)?;
    Ok(theta)
}
