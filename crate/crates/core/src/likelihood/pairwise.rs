//! Bivariate densities of the max-stable process and the distance-cutoff
//! composite likelihood built from them.
//!
//! The pair CDF is F(z1, z2) = exp{-V(z1, z2)} with V the exponent function;
//! the density is the mixed partial {V1 V2 - V12} exp{-V}. The full joint
//! density over many locations is intractable, hence the pairwise sum.

use crate::likelihood::LikelihoodError;
use crate::models::{ReplicateSet, SpatialDomain, Transform};
use crate::numerics::matern_cov;

/// The correlation is capped strictly below one before density evaluation;
/// the mixed partial V12 degenerates at exact comonotonicity.
const MAX_PSI: f64 = 1.0 - 1e-12;

/// One pair of unit-Frechet observations and the correlation of the
/// underlying Gaussian pair.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BivariatePair {
    z1: f64,
    z2: f64,
    psi: f64,
}

impl BivariatePair {
    pub fn new(z1: f64, z2: f64, psi: f64) -> Result<BivariatePair, LikelihoodError> {
        if !(z1 > 0.0) || !z1.is_finite() || !(z2 > 0.0) || !z2.is_finite() {
            return Err(LikelihoodError::Domain(format!(
                "pair values must be positive and finite, got ({z1}, {z2})"
            )));
        }
        if !(psi > -1.0 && psi <= 1.0) {
            return Err(LikelihoodError::Domain(format!(
                "pair correlation must lie in (-1, 1], got {psi}"
            )));
        }
        Ok(BivariatePair { z1, z2, psi })
    }

    pub fn z1(&self) -> f64 {
        self.z1
    }

    pub fn z2(&self) -> f64 {
        self.z2
    }

    pub fn psi(&self) -> f64 {
        self.psi
    }
}

/// Exponent function of the bivariate max-stable pair and its partial
/// derivatives, returned as (V, V1, V2, V12).
///
/// V is order -1 homogeneous and exact at complete dependence:
/// V(z, z, 1) = 1/z bitwise. The derivatives are undefined at that
/// degenerate point (the discriminant vanishes) and come back non-finite;
/// density evaluation avoids it by capping psi.
pub fn schlather_exponent(
    z1: f64,
    z2: f64,
    psi: f64,
) -> Result<(f64, f64, f64, f64), LikelihoodError> {
    let pair = BivariatePair::new(z1, z2, psi)?;
    Ok(exponent(pair))
}

fn exponent(pair: BivariatePair) -> (f64, f64, f64, f64) {
    let BivariatePair { z1, z2, psi } = pair;
    // The discriminant z1^2 - 2 z1 z2 psi + z2^2 in its cancellation-free
    // form: a sum of two nonnegative terms, each bitwise symmetric in
    // (z1, z2), so the whole evaluation is exactly symmetric.
    let diff = z1 - z2;
    let disc = diff * diff + 2.0 * z1 * z2 * (1.0 - psi);
    let root = disc.sqrt();
    let v = (1.0 / z1 + 1.0 / z2) * 0.5 * (1.0 + root / (z1 + z2));
    let v1 = -0.5 / (z1 * z1) + 0.5 * (psi / z1 - z2 / (z1 * z1)) / root;
    let v2 = -0.5 / (z2 * z2) + 0.5 * (psi / z2 - z1 / (z2 * z2)) / root;
    let v12 = -0.5 * (1.0 - psi * psi) / (root * root * root);
    (v, v1, v2, v12)
}

/// Log of the bivariate density {V1 V2 - V12} exp{-V}.
///
/// The bracket is positive for every legal pair; a nonpositive value means
/// the evaluation broke down numerically and is reported as an error rather
/// than silently fed to the logarithm.
pub fn schlather_bivariate_logdensity(pair: BivariatePair) -> Result<f64, LikelihoodError> {
    let capped = BivariatePair {
        psi: pair.psi.min(MAX_PSI),
        ..pair
    };
    let (v, v1, v2, v12) = exponent(capped);
    let bracket = v1 * v2 - v12;
    if !bracket.is_finite() || bracket <= 0.0 {
        return Err(LikelihoodError::DensityBracket { value: bracket });
    }
    Ok(bracket.ln() - v)
}

/// Pairwise log-likelihood of a replicate set under the max-stable model
/// with Matern dependence parameters `theta` = (rho, nu).
///
/// Sums the bivariate log-density over every location pair within `cutoff`
/// distance and over all replicates. Data tagged with the log transform are
/// mapped back to the original scale per value; untransformed data are used
/// directly. Per-replicate sums are accumulated in sorted order, so the
/// total is exactly invariant to replicate order.
pub fn pairwise_loglik(
    theta: &[f64],
    rs: &ReplicateSet,
    domain: &SpatialDomain,
    cutoff: f64,
) -> Result<f64, LikelihoodError> {
    let [rho, nu] = *theta else {
        return Err(LikelihoodError::Domain(format!(
            "pairwise likelihood expects (rho, nu), got {} parameters",
            theta.len()
        )));
    };
    if !(cutoff > 0.0) || !cutoff.is_finite() {
        return Err(LikelihoodError::Domain(format!(
            "cutoff distance must be positive and finite, got {cutoff}"
        )));
    }
    if rs.n() != domain.len() {
        return Err(LikelihoodError::Domain(format!(
            "replicates have {} values, domain has {} locations",
            rs.n(),
            domain.len()
        )));
    }
    let back_transform = match rs.transform_tag() {
        Transform::None => false,
        Transform::LogGumbel => true,
        other => {
            return Err(LikelihoodError::Domain(format!(
                "pairwise likelihood needs original-scale or log-transformed data, got {other:?}"
            )))
        }
    };

    let n = domain.len();
    let mut pairs = Vec::new();
    for j in 0..n {
        for k in (j + 1)..n {
            let distance = domain.distance(j, k);
            if distance <= cutoff {
                let psi = matern_cov(distance, 1.0, rho, nu)?.min(MAX_PSI);
                pairs.push((j, k, psi));
            }
        }
    }
    if pairs.is_empty() {
        return Err(LikelihoodError::NoPairs { cutoff });
    }

    let mut per_replicate = Vec::with_capacity(rs.m());
    for z in rs.replicates() {
        let mut sum = 0.0;
        for &(j, k, psi) in &pairs {
            let (zj, zk) = if back_transform {
                (z[j].exp(), z[k].exp())
            } else {
                (z[j], z[k])
            };
            sum += schlather_bivariate_logdensity(BivariatePair::new(zj, zk, psi)?)?;
        }
        per_replicate.push(sum);
    }
    per_replicate.sort_unstable_by(f64::total_cmp);
    Ok(per_replicate.iter().sum())
}

/// Default pair cutoff distance.
pub const DEFAULT_CUTOFF: f64 = 3.0;
