//! Closed-form reference estimators for the analytically tractable models.

use super::{
    model_id, LinearRegression, Marginal, ModelError, NormalVariance, Prior, ReplicateSet,
    UniformTheta,
};

/// Exact posterior median (the Bayes estimator under absolute-error loss)
/// where conjugacy makes it available. Dispatch is by the model id carried in
/// the replicate set.
pub fn closed_form_bayes(
    model_id_tag: u16,
    rs: &ReplicateSet,
    prior: &Prior,
) -> Result<Vec<f64>, ModelError> {
    match model_id_tag {
        model_id::UNIFORM_THETA => {
            let model = UniformTheta::new(prior.clone())?;
            uniform_theta_bayes(&model, rs)
        }
        model_id::NORMAL_VARIANCE => {
            let model = NormalVariance::new(prior.clone())?;
            normal_variance_bayes(&model, rs)
        }
        model_id::LINEAR_REGRESSION => {
            if !matches!(prior.marginals(), [Marginal::StdNormal, Marginal::StdNormal]) {
                return Err(ModelError::NonConjugate {
                    model: "linear_regression",
                    expected: "two standard normal marginals",
                });
            }
            let model = LinearRegression::new(rs.n(), 0.05)?;
            model.posterior_mean(rs)
        }
        other => Err(ModelError::Parameter(format!(
            "no closed-form Bayes estimator for model id {other}"
        ))),
    }
}

/// Posterior median 2^{1/(alpha+m)} max(Z_1, ..., Z_m, beta) for uniform
/// observations under a Pareto(alpha, beta) prior.
pub fn uniform_theta_bayes(
    model: &UniformTheta,
    rs: &ReplicateSet,
) -> Result<Vec<f64>, ModelError> {
    if rs.n() != 1 {
        return Err(ModelError::Parameter(format!(
            "uniform_theta replicates are scalar, got dimension {}",
            rs.n()
        )));
    }
    let (alpha, beta) = model.shape_scale();
    let max = rs.data().iter().cloned().fold(beta, f64::max);
    Ok(vec![2.0f64.powf(1.0 / (alpha + rs.m() as f64)) * max])
}

/// Posterior median of the conjugate inverse-gamma posterior
/// InvGamma(a + m/2, b + sum z^2 / 2) for mean-zero Gaussian data.
pub fn normal_variance_bayes(
    model: &NormalVariance,
    rs: &ReplicateSet,
) -> Result<Vec<f64>, ModelError> {
    if rs.n() != 1 {
        return Err(ModelError::Parameter(format!(
            "normal_variance replicates are scalar, got dimension {}",
            rs.n()
        )));
    }
    let (a, b) = model.shape_scale();
    let ssq: f64 = rs.data().iter().map(|z| z * z).sum();
    let post = Marginal::InverseGamma {
        shape: a + 0.5 * rs.m() as f64,
        scale: b + 0.5 * ssq,
    };
    Ok(vec![post.median()])
}

/// Applies a single-replicate estimator to each replicate independently and
/// averages the estimates. Not consistent in general; kept as the baseline it
/// is.
pub fn one_at_a_time<F>(mut single: F, rs: &ReplicateSet) -> Result<Vec<f64>, ModelError>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>, ModelError>,
{
    let mut acc: Option<Vec<f64>> = None;
    for rep in rs.replicates() {
        let est = single(rep)?;
        match &mut acc {
            None => acc = Some(est),
            Some(acc) => {
                if est.len() != acc.len() {
                    return Err(ModelError::Parameter(format!(
                        "estimator dimension changed from {} to {}",
                        acc.len(),
                        est.len()
                    )));
                }
                for (a, e) in acc.iter_mut().zip(&est) {
                    *a += e;
                }
            }
        }
    }
    let mut out = acc.expect("replicate sets are non-empty");
    let m = rs.m() as f64;
    for v in out.iter_mut() {
        *v /= m;
    }
    Ok(out)
}
