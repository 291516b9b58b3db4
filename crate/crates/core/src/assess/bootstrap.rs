//! Block bootstrap resampling and percentile confidence intervals.

use std::collections::HashMap;

use crate::models::ReplicateSet;
use crate::numerics::{Matrix, RngStream};

use super::{AssessError, Estimator};

/// Conventional resample count for bootstrap intervals.
pub const DEFAULT_RESAMPLES: usize = 400;

/// Bootstrap estimates and the percentile interval they imply.
#[derive(Clone, Debug)]
pub struct BootstrapResult {
    levels: (f64, f64),
    /// Column b holds the estimate from pseudo-set b.
    estimates: Matrix,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl BootstrapResult {
    pub fn resamples(&self) -> usize {
        self.estimates.cols()
    }

    pub fn levels(&self) -> (f64, f64) {
        self.levels
    }

    pub fn estimates(&self) -> &Matrix {
        &self.estimates
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    /// One row per parameter: name, the point estimate on the original
    /// data, then the interval endpoints.
    pub fn to_csv(&self, names: &[&str], point: &[f64]) -> Result<String, AssessError> {
        let p = self.estimates.rows();
        if names.len() != p || point.len() != p {
            return Err(AssessError::Invalid(format!(
                "{} names and {} point estimates for {} parameters",
                names.len(),
                point.len(),
                p
            )));
        }
        let mut out = String::from("param,estimate,lo,hi\n");
        for j in 0..p {
            out.push_str(&format!(
                "{},{:.16e},{:.16e},{:.16e}\n",
                names[j], point[j], self.lower[j], self.upper[j]
            ));
        }
        Ok(out)
    }
}

/// Order-statistic quantile with linear interpolation: at rank
/// h = (len - 1) q the value is x[floor h] + frac(h) (x[floor h + 1] -
/// x[floor h]).  Endpoints are inclusive, so q = 0 and q = 1 return the
/// extremes.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let i = h.floor() as usize;
    if i + 1 >= sorted.len() {
        sorted[sorted.len() - 1]
    } else {
        sorted[i] + (h - i as f64) * (sorted[i + 1] - sorted[i])
    }
}

/// Resamples whole blocks of replicates with replacement.
///
/// `block_labels[j]` names the block replicate j belongs to; labels are
/// arbitrary and blocks may differ in size.  Each pseudo-set concatenates
/// uniformly drawn blocks until it reaches at least `rs.m()` replicates and
/// keeps every replicate of every drawn block, so pseudo-set sizes vary by
/// up to the largest block size minus one.
pub fn block_bootstrap(
    rs: &ReplicateSet,
    block_labels: &[usize],
    b: usize,
    rng: &mut RngStream,
) -> Result<Vec<ReplicateSet>, AssessError> {
    if block_labels.is_empty() {
        return Err(AssessError::Invalid("no block labels".into()));
    }
    if block_labels.len() != rs.m() {
        return Err(AssessError::Invalid(format!(
            "{} block labels for {} replicates",
            block_labels.len(),
            rs.m()
        )));
    }
    if b == 0 {
        return Err(AssessError::Invalid(
            "resample count must be at least 1".into(),
        ));
    }
    // Group replicate indices by label, blocks ordered by first appearance.
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    let mut slot: HashMap<usize, usize> = HashMap::new();
    for (j, &label) in block_labels.iter().enumerate() {
        let bi = *slot.entry(label).or_insert_with(|| {
            blocks.push(Vec::new());
            blocks.len() - 1
        });
        blocks[bi].push(j);
    }

    let m = rs.m();
    let mut out = Vec::with_capacity(b);
    let mut indices = Vec::with_capacity(m);
    for _ in 0..b {
        indices.clear();
        while indices.len() < m {
            let bi = rng.u64_below(blocks.len() as u64) as usize;
            indices.extend_from_slice(&blocks[bi]);
        }
        out.push(rs.select(&indices)?);
    }
    Ok(out)
}

/// Applies the estimator to every pseudo-set and reads percentile intervals
/// off the bootstrap distribution of each parameter.
pub fn bootstrap_ci(
    estimator: &dyn Estimator,
    pseudo_sets: &[ReplicateSet],
    levels: (f64, f64),
) -> Result<BootstrapResult, AssessError> {
    if pseudo_sets.len() < 2 {
        return Err(AssessError::Invalid(
            "bootstrap intervals need at least two pseudo-sets".into(),
        ));
    }
    let (lo, hi) = levels;
    if !(lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo <= hi && hi <= 1.0) {
        return Err(AssessError::Invalid(format!(
            "levels must satisfy 0 <= lo <= hi <= 1, got ({lo}, {hi})"
        )));
    }

    let first = estimator.estimate(&pseudo_sets[0])?;
    let p = first.len();
    if p == 0 {
        return Err(AssessError::Estimator("empty estimate".into()));
    }
    let mut estimates = Matrix::zeros(p, pseudo_sets.len());
    for j in 0..p {
        estimates.set(j, 0, first[j]);
    }
    for (col, rs) in pseudo_sets.iter().enumerate().skip(1) {
        let est = estimator.estimate(rs)?;
        if est.len() != p {
            return Err(AssessError::Estimator(format!(
                "estimate length changed from {p} to {}",
                est.len()
            )));
        }
        for j in 0..p {
            estimates.set(j, col, est[j]);
        }
    }

    let mut lower = Vec::with_capacity(p);
    let mut upper = Vec::with_capacity(p);
    let mut row = vec![0.0; pseudo_sets.len()];
    for j in 0..p {
        for col in 0..pseudo_sets.len() {
            row[col] = estimates.get(j, col);
        }
        row.sort_unstable_by(f64::total_cmp);
        lower.push(percentile(&row, lo));
        upper.push(percentile(&row, hi));
    }
    Ok(BootstrapResult {
        levels,
        estimates,
        lower,
        upper,
    })
}
