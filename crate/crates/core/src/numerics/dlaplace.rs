//! The delta-Laplace (generalised Gaussian) distribution.
//!
//! Density f(y) = delta / (2 tau Gamma(1/delta)) exp(-|(y - mu)/tau|^delta).
//! delta = 1 recovers the Laplace distribution, delta = 2 a normal with
//! variance tau^2/2.  The conditional-extremes simulator uses the quantile
//! to impose these margins on a Gaussian copula.

use super::special::{gamma_quantile_unit, log_gamma, reg_lower_gamma_raw};
use super::{domain, NumericsError};

/// Parameter triple (location mu, scale tau > 0, shape delta > 0) with the
/// shape-dependent constants precomputed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaLaplace {
    pub mu: f64,
    pub tau: f64,
    pub delta: f64,
    ln_gamma_inv_delta: f64,
}

impl DeltaLaplace {
    pub fn new(mu: f64, tau: f64, delta: f64) -> Result<Self, NumericsError> {
        if !mu.is_finite() || !(tau > 0.0) || !(delta > 0.0) {
            return Err(domain(
                "delta_laplace",
                format!("mu = {mu}, tau = {tau}, delta = {delta}"),
            ));
        }
        Ok(DeltaLaplace {
            mu,
            tau,
            delta,
            ln_gamma_inv_delta: log_gamma(1.0 / delta)?,
        })
    }

    /// Probability density at y.
    pub fn pdf(&self, y: f64) -> f64 {
        let t = ((y - self.mu) / self.tau).abs();
        self.delta / (2.0 * self.tau) * (-t.powf(self.delta) - self.ln_gamma_inv_delta).exp()
    }

    /// Distribution function; 1/2 plus a signed regularized incomplete
    /// gamma of |(y - mu)/tau|^delta.
    pub fn cdf(&self, y: f64) -> f64 {
        let z = y - self.mu;
        let t = (z.abs() / self.tau).powf(self.delta);
        let half_p = 0.5 * reg_lower_gamma_raw(1.0 / self.delta, t, self.ln_gamma_inv_delta);
        if z >= 0.0 {
            0.5 + half_p
        } else {
            0.5 - half_p
        }
    }

    /// Quantile for p in (0, 1).  |Y - mu|^delta is Gamma(1/delta,
    /// scale tau^delta), so the quantile inverts a unit gamma and takes the
    /// delta-th root.
    pub fn quantile(&self, p: f64) -> Result<f64, NumericsError> {
        if !(p > 0.0 && p < 1.0) {
            return Err(domain("delta_laplace", format!("p = {p} not in (0, 1)")));
        }
        let u = 2.0 * (p - 0.5).abs();
        let g = gamma_quantile_unit(u, 1.0 / self.delta, self.ln_gamma_inv_delta)?;
        let mag = self.tau * g.powf(1.0 / self.delta);
        Ok(if p >= 0.5 { self.mu + mag } else { self.mu - mag })
    }
}
