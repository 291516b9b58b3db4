//! Priors as products of independent marginals.

use crate::numerics::RngStream;

use super::ModelError;

/// One prior marginal. Uniform and Pareto marginals are sampled by inverse
/// CDF; the inverse gamma is sampled as the reciprocal of a gamma draw.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Marginal {
    Uniform { lo: f64, hi: f64 },
    /// Pr(X <= x) = 1 - (x/scale)^(-shape) for x >= scale.
    Pareto { shape: f64, scale: f64 },
    /// Density proportional to x^(-shape-1) exp(-scale/x).
    InverseGamma { shape: f64, scale: f64 },
    StdNormal,
}

impl Marginal {
    pub fn validate(&self) -> Result<(), ModelError> {
        let ok = match *self {
            Marginal::Uniform { lo, hi } => lo.is_finite() && hi.is_finite() && lo < hi,
            Marginal::Pareto { shape, scale } | Marginal::InverseGamma { shape, scale } => {
                shape.is_finite() && scale.is_finite() && shape > 0.0 && scale > 0.0
            }
            Marginal::StdNormal => true,
        };
        if ok {
            Ok(())
        } else {
            Err(ModelError::Parameter(format!("invalid prior marginal {self:?}")))
        }
    }

    pub fn sample(&self, rng: &mut RngStream) -> f64 {
        match *self {
            Marginal::Uniform { lo, hi } => lo + (hi - lo) * rng.uniform01(),
            Marginal::Pareto { shape, scale } => {
                // Inverse CDF; u = 0 maps to the lower endpoint exactly.
                scale * (1.0 - rng.uniform01()).powf(-1.0 / shape)
            }
            Marginal::InverseGamma { shape, scale } => scale / gamma_unit(shape, rng),
            Marginal::StdNormal => rng.std_normal(),
        }
    }

    /// Support endpoints, possibly infinite.
    pub fn bounds(&self) -> (f64, f64) {
        match *self {
            Marginal::Uniform { lo, hi } => (lo, hi),
            Marginal::Pareto { scale, .. } => (scale, f64::INFINITY),
            Marginal::InverseGamma { .. } => (0.0, f64::INFINITY),
            Marginal::StdNormal => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    pub fn is_bounded(&self) -> bool {
        let (lo, hi) = self.bounds();
        lo.is_finite() && hi.is_finite()
    }

    pub fn median(&self) -> f64 {
        match *self {
            Marginal::Uniform { lo, hi } => 0.5 * (lo + hi),
            Marginal::Pareto { shape, scale } => scale * 2.0f64.powf(1.0 / shape),
            Marginal::InverseGamma { shape, scale } => {
                // X ~ InvGamma(a, b) iff 1/X ~ Gamma(a, rate b).
                scale / crate::numerics::gamma_quantile(0.5, shape, 1.0).expect("valid shape")
            }
            Marginal::StdNormal => 0.0,
        }
    }

    pub fn log_pdf(&self, x: f64) -> f64 {
        match *self {
            Marginal::Uniform { lo, hi } => {
                if x >= lo && x <= hi {
                    -(hi - lo).ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
            Marginal::Pareto { shape, scale } => {
                if x >= scale {
                    shape.ln() + shape * scale.ln() - (shape + 1.0) * x.ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
            Marginal::InverseGamma { shape, scale } => {
                if x > 0.0 {
                    let ln_gamma = crate::numerics::log_gamma(shape).expect("shape > 0");
                    shape * scale.ln() - ln_gamma - (shape + 1.0) * x.ln() - scale / x
                } else {
                    f64::NEG_INFINITY
                }
            }
            Marginal::StdNormal => -0.5 * x * x - 0.5 * (2.0 * std::f64::consts::PI).ln(),
        }
    }
}

/// Gamma(shape, 1) draw via the squeeze-accept method of Marsaglia and Tsang,
/// with the standard power boost for shape < 1.
fn gamma_unit(shape: f64, rng: &mut RngStream) -> f64 {
    debug_assert!(shape > 0.0);
    if shape < 1.0 {
        let u = 1.0 - rng.uniform01(); // (0, 1], keeps the draw positive
        return gamma_unit(shape + 1.0, rng) * u.powf(1.0 / shape);
    }
    let d = shape - 1.0 / 3.0;
    let c = 1.0 / (9.0 * d).sqrt();
    loop {
        let x = rng.std_normal();
        let v = 1.0 + c * x;
        if v <= 0.0 {
            continue;
        }
        let v = v * v * v;
        let u = 1.0 - rng.uniform01();
        if u < 1.0 - 0.0331 * (x * x) * (x * x) {
            return d * v;
        }
        if u.ln() < 0.5 * x * x + d * (1.0 - v + v.ln()) {
            return d * v;
        }
    }
}

/// Product prior: one marginal per model parameter.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(transparent)]
pub struct Prior {
    marginals: Vec<Marginal>,
}

impl Prior {
    pub fn new(marginals: Vec<Marginal>) -> Result<Self, ModelError> {
        if marginals.is_empty() {
            return Err(ModelError::Parameter("prior requires at least one marginal".into()));
        }
        for m in &marginals {
            m.validate()?;
        }
        Ok(Prior { marginals })
    }

    pub fn dim(&self) -> usize {
        self.marginals.len()
    }

    pub fn marginals(&self) -> &[Marginal] {
        &self.marginals
    }

    pub fn sample_into(&self, out: &mut [f64], rng: &mut RngStream) {
        debug_assert_eq!(out.len(), self.dim());
        for (v, m) in out.iter_mut().zip(&self.marginals) {
            *v = m.sample(rng);
        }
    }

    pub fn sample(&self, rng: &mut RngStream) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.sample_into(&mut out, rng);
        out
    }

    pub fn log_pdf(&self, theta: &[f64]) -> f64 {
        debug_assert_eq!(theta.len(), self.dim());
        theta
            .iter()
            .zip(&self.marginals)
            .map(|(x, m)| m.log_pdf(*x))
            .sum()
    }

    /// True when every marginal has a bounded support, the condition under
    /// which parameters can be rescaled to the unit interval.
    pub fn all_bounded(&self) -> bool {
        self.marginals.iter().all(Marginal::is_bounded)
    }
}

/// `count` independent draws stored column per draw (draw contiguous).
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterSample {
    dim: usize,
    count: usize,
    data: Vec<f64>,
}

impl ParameterSample {
    /// Wrap explicit draws, `data` holding `dim` values per draw.
    pub fn from_flat(dim: usize, data: Vec<f64>) -> Self {
        assert!(dim >= 1, "parameter dimension must be at least 1");
        assert!(
            !data.is_empty() && data.len() % dim == 0,
            "flat data length {} is not a positive multiple of {dim}",
            data.len()
        );
        let count = data.len() / dim;
        ParameterSample { dim, count, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn column(&self, k: usize) -> &[f64] {
        &self.data[k * self.dim..(k + 1) * self.dim]
    }

    pub fn columns(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }
}

pub fn sample_prior(prior: &Prior, count: usize, rng: &mut RngStream) -> ParameterSample {
    assert!(count >= 1, "sample_prior requires count >= 1");
    let dim = prior.dim();
    let mut data = vec![0.0; dim * count];
    for chunk in data.chunks_exact_mut(dim) {
        prior.sample_into(chunk, rng);
    }
    ParameterSample { dim, count, data }
}

/// Kolmogorov-Smirnov distance of a sample against a reference CDF.
/// Shared by distributional tests across the crate.
#[cfg(test)]
pub(crate) fn ks_distance(sample: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    sample.sort_by(f64::total_cmp);
    let n = sample.len() as f64;
    let mut ks = 0.0f64;
    for (i, x) in sample.iter().enumerate() {
        let f = cdf(*x);
        ks = ks.max((f - i as f64 / n).abs());
        ks = ks.max(((i + 1) as f64 / n - f).abs());
    }
    ks
}
