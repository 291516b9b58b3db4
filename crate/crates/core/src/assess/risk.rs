//! Risk comparison across estimators on shared simulated test data.

use std::time::Instant;

use crate::models::{sample_prior, DataModel, Prior, ReplicateSet};
use crate::numerics::RngStream;
use crate::training::{pooled_risk, sorted_mean, LossKind, LossSpec};

use super::{AssessError, Estimator};

/// One line of a risk comparison: an estimator's Monte-Carlo risk under one
/// loss at one replicate count, with the standard error across parameter
/// draws and the wall time the estimator spent on that replicate count.
#[derive(Clone, Debug)]
pub struct RiskRow {
    pub estimator: String,
    pub m: usize,
    pub loss: String,
    pub risk: f64,
    pub se: f64,
    pub seconds: f64,
}

#[derive(Clone, Debug, Default)]
pub struct RiskReport {
    rows: Vec<RiskRow>,
}

impl RiskReport {
    pub fn from_rows(rows: Vec<RiskRow>) -> RiskReport {
        RiskReport { rows }
    }

    pub fn rows(&self) -> &[RiskRow] {
        &self.rows
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("estimator,m,loss,risk,se,seconds\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{:.16e},{:.16e},{:.3}\n",
                r.estimator, r.m, r.loss, r.risk, r.se, r.seconds
            ));
        }
        out
    }
}

/// The zero-one loss needs an absolute criterion when a true parameter is
/// exactly zero; derive one from the prior when the caller did not set it:
/// a tenth of the marginal's range when bounded, 0.1 otherwise.
fn effective_loss(spec: &LossSpec, prior: &Prior) -> LossSpec {
    if !matches!(spec.kind(), LossKind::ZeroOne { .. }) || spec.zero_fallback().is_some() {
        return spec.clone();
    }
    let fallbacks: Vec<f64> = prior
        .marginals()
        .iter()
        .map(|marginal| {
            let (lo, hi) = marginal.bounds();
            if lo.is_finite() && hi.is_finite() {
                0.1 * (hi - lo)
            } else {
                0.1
            }
        })
        .collect();
    spec.clone()
        .with_zero_fallback(fallbacks)
        .expect("derived fallbacks are positive")
}

/// Monte-Carlo risk of every estimator at every replicate count in `m_grid`
/// under every loss, on shared data.
///
/// For each replicate count, `k_test` parameters are drawn from `prior` and
/// `sets_per_draw` data sets are simulated per draw; every estimator then
/// sees exactly those data sets.  Randomness is consumed from `rng` in a
/// fixed order (all parameter draws for a replicate count, then the data
/// sets draw by draw) and estimation draws nothing, so a rerun with an
/// equally seeded stream reproduces the report except for the timing column.
/// Estimates are computed once per estimator and reused across losses; the
/// `seconds` column covers the estimation calls only.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_risk(
    estimators: &[(&str, &dyn Estimator)],
    model: &dyn DataModel,
    prior: &Prior,
    m_grid: &[usize],
    k_test: usize,
    sets_per_draw: usize,
    losses: &[LossSpec],
    rng: &mut RngStream,
) -> Result<RiskReport, AssessError> {
    if estimators.is_empty() {
        return Err(AssessError::Invalid("no estimators to assess".into()));
    }
    if m_grid.is_empty() || m_grid.contains(&0) {
        return Err(AssessError::Invalid(
            "replicate grid must be non-empty with every count at least 1".into(),
        ));
    }
    if k_test == 0 || sets_per_draw == 0 {
        return Err(AssessError::Invalid(
            "test draws and sets per draw must be at least 1".into(),
        ));
    }
    if losses.is_empty() {
        return Err(AssessError::Invalid("no losses to evaluate".into()));
    }
    let p = model.parameter_count();
    if prior.dim() != p {
        return Err(AssessError::Invalid(format!(
            "prior has {} marginals, model has {} parameters",
            prior.dim(),
            p
        )));
    }
    for spec in losses {
        if let Some(d) = spec.scaling_dim() {
            if d != p {
                return Err(AssessError::Invalid(format!(
                    "loss scaling covers {d} parameters, model has {p}"
                )));
            }
        }
    }
    let specs: Vec<LossSpec> = losses.iter().map(|l| effective_loss(l, prior)).collect();

    let n = model.replicate_dim();
    let transform = model.default_transform();
    let mut rows = Vec::new();
    for &m in m_grid {
        let vartheta = sample_prior(prior, k_test, rng);
        let mut datasets: Vec<Vec<ReplicateSet>> = Vec::with_capacity(k_test);
        for k in 0..k_test {
            let prepared = model.prepare(vartheta.column(k))?;
            let mut sets = Vec::with_capacity(sets_per_draw);
            for _ in 0..sets_per_draw {
                let mut data = vec![0.0; n * m];
                prepared.simulate_into(&mut data, m, rng)?;
                let rs = ReplicateSet::new(n, m, data, model.model_id())?
                    .apply_transform(transform)?;
                sets.push(rs);
            }
            datasets.push(sets);
        }

        for (id, estimator) in estimators {
            let start = Instant::now();
            let mut estimates: Vec<Vec<Vec<f64>>> = Vec::with_capacity(k_test);
            for (k, sets) in datasets.iter().enumerate() {
                let theta = vartheta.column(k);
                let mut per_draw = Vec::with_capacity(sets.len());
                for rs in sets {
                    let est = estimator.estimate_with_truth(rs, theta)?;
                    if est.len() != p {
                        return Err(AssessError::Estimator(format!(
                            "{id} returned {} values for {p} parameters",
                            est.len()
                        )));
                    }
                    per_draw.push(est);
                }
                estimates.push(per_draw);
            }
            let seconds = start.elapsed().as_secs_f64();

            for spec in &specs {
                let mut means = Vec::with_capacity(k_test);
                for (k, per_draw) in estimates.iter().enumerate() {
                    let theta = vartheta.column(k);
                    let mut draw_losses: Vec<f64> =
                        per_draw.iter().map(|est| spec.value(est, theta)).collect();
                    means.push(sorted_mean(&mut draw_losses));
                }
                let (risk, se) = pooled_risk(means);
                rows.push(RiskRow {
                    estimator: (*id).to_string(),
                    m,
                    loss: spec.kind().label().to_string(),
                    risk,
                    se,
                    seconds,
                });
            }
        }
    }
    Ok(RiskReport { rows })
}
