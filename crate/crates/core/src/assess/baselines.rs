//! Reference estimators wrapped for assessment registries.

use crate::likelihood::{map_estimate, MapProblem};
use crate::models::{closed_form_bayes, one_at_a_time, Prior, ReplicateSet};

use super::{AssessError, Estimator};

/// Ignores the data and answers with a fixed vector, e.g. the prior median.
/// The weakest sensible baseline: any estimator that loses to it has learnt
/// nothing from the data.
pub struct ConstantEstimator {
    value: Vec<f64>,
}

impl ConstantEstimator {
    pub fn new(value: Vec<f64>) -> Result<Self, AssessError> {
        if value.is_empty() || !value.iter().all(|v| v.is_finite()) {
            return Err(AssessError::Invalid(
                "constant estimate must be non-empty and finite".into(),
            ));
        }
        Ok(ConstantEstimator { value })
    }
}

impl Estimator for ConstantEstimator {
    fn estimate(&self, _rs: &ReplicateSet) -> Result<Vec<f64>, AssessError> {
        Ok(self.value.clone())
    }
}

/// Closed-form posterior median, dispatched on the model id carried by the
/// replicate set.  Only the conjugate toy models support it.
pub struct OracleEstimator {
    prior: Prior,
}

impl OracleEstimator {
    pub fn new(prior: Prior) -> OracleEstimator {
        OracleEstimator { prior }
    }
}

impl Estimator for OracleEstimator {
    fn estimate(&self, rs: &ReplicateSet) -> Result<Vec<f64>, AssessError> {
        closed_form_bayes(rs.model_id(), rs, &self.prior).map_err(AssessError::from)
    }
}

/// Applies the closed-form oracle to each replicate separately and averages
/// the single-replicate estimates.  Kept as the inconsistent baseline it is.
pub struct OneAtATimeEstimator {
    prior: Prior,
}

impl OneAtATimeEstimator {
    pub fn new(prior: Prior) -> OneAtATimeEstimator {
        OneAtATimeEstimator { prior }
    }
}

impl Estimator for OneAtATimeEstimator {
    fn estimate(&self, rs: &ReplicateSet) -> Result<Vec<f64>, AssessError> {
        let id = rs.model_id();
        let n = rs.n();
        one_at_a_time(
            |rep| {
                let single = ReplicateSet::new(n, 1, rep.to_vec(), id)?;
                closed_form_bayes(id, &single, &self.prior)
            },
            rs,
        )
        .map_err(AssessError::from)
    }
}

/// Posterior-mode estimator around a [`MapProblem`].  Without a starting
/// point the search begins at the centre of the box; with the generating
/// parameter available it starts there, pulled strictly inside the bounds,
/// which is the usual benchmarking convention for likelihood baselines.
pub struct MapEstimator<'a> {
    problem: MapProblem<'a>,
}

impl<'a> MapEstimator<'a> {
    pub fn new(problem: MapProblem<'a>) -> MapEstimator<'a> {
        MapEstimator { problem }
    }

    fn clamped_inside(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.problem.bounds())
            .map(|(v, (lo, hi))| {
                let margin = 1e-6 * (hi - lo);
                v.clamp(lo + margin, hi - margin)
            })
            .collect()
    }
}

impl Estimator for MapEstimator<'_> {
    fn estimate(&self, rs: &ReplicateSet) -> Result<Vec<f64>, AssessError> {
        let init: Vec<f64> = self
            .problem
            .bounds()
            .iter()
            .map(|(lo, hi)| 0.5 * (lo + hi))
            .collect();
        map_estimate(&self.problem, rs, &init).map_err(AssessError::from)
    }

    fn estimate_with_truth(
        &self,
        rs: &ReplicateSet,
        truth: &[f64],
    ) -> Result<Vec<f64>, AssessError> {
        let init = if truth.len() == self.problem.bounds().len() {
            self.clamped_inside(truth)
        } else {
            truth.to_vec()
        };
        map_estimate(&self.problem, rs, &init).map_err(AssessError::from)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::likelihood::LikelihoodError;
    use crate::models::{model_id, DataModel, Marginal, UniformTheta};
    use crate::numerics::RngStream;

    fn pareto_prior() -> Prior {
        Prior::new(vec![Marginal::Pareto { shape: 4.0, scale: 1.0 }]).unwrap()
    }

    fn simulated(theta: f64, m: usize, seed: u64) -> ReplicateSet {
        UniformTheta::default_model()
            .simulate(&[theta], m, &mut RngStream::new(seed, 0))
            .unwrap()
    }

    #[test]
    fn constant_ignores_the_data() {
        let est = ConstantEstimator::new(vec![2.5, -1.0]).unwrap();
        let a = est.estimate(&simulated(1.5, 3, 1)).unwrap();
        let b = est.estimate(&simulated(2.5, 9, 2)).unwrap();
        assert_eq!(a, vec![2.5, -1.0]);
        assert_eq!(a, b);
        assert!(ConstantEstimator::new(vec![]).is_err());
        assert!(ConstantEstimator::new(vec![f64::NAN]).is_err());
    }

    #[test]
    fn oracle_adapter_matches_the_direct_call() {
        let rs = simulated(1.5, 12, 3);
        let via_adapter = OracleEstimator::new(pareto_prior()).estimate(&rs).unwrap();
        let direct = closed_form_bayes(model_id::UNIFORM_THETA, &rs, &pareto_prior()).unwrap();
        assert_eq!(via_adapter, direct);
    }

    #[test]
    fn one_at_a_time_adapter_matches_the_direct_call() {
        let rs = simulated(1.5, 12, 4);
        let via_adapter = OneAtATimeEstimator::new(pareto_prior())
            .estimate(&rs)
            .unwrap();
        let direct = one_at_a_time(
            |rep| {
                let single =
                    ReplicateSet::new(1, 1, rep.to_vec(), model_id::UNIFORM_THETA)?;
                closed_form_bayes(model_id::UNIFORM_THETA, &single, &pareto_prior())
            },
            &rs,
        )
        .unwrap();
        assert_eq!(via_adapter, direct);
    }

    #[test]
    fn map_adapter_finds_the_posterior_mode() {
        // Uniform likelihood with a Pareto prior: the posterior density is
        // proportional to theta^{-(alpha+1+m)} on theta >= max(beta, max Z),
        // so the mode sits exactly at that lower edge.
        let prior = pareto_prior();
        let rs = simulated(1.8, 20, 5);
        let mode = rs.data().iter().cloned().fold(1.0, f64::max);
        let loglik = |th: &[f64], rs: &ReplicateSet| {
            let top = rs.data().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            if th[0] >= top {
                Ok(-(rs.m() as f64) * th[0].ln())
            } else {
                Err(LikelihoodError::Domain(
                    "support excludes the data maximum".into(),
                ))
            }
        };
        let problem = MapProblem::new(
            loglik,
            |th| prior.log_pdf(th),
            vec![(1.0, 30.0)],
        )
        .unwrap();
        let map = MapEstimator::new(problem);

        let from_truth = map.estimate_with_truth(&rs, &[1.8]).unwrap();
        assert!(
            (from_truth[0] - mode).abs() < 5e-3,
            "estimate {} vs mode {}",
            from_truth[0],
            mode
        );
        let from_midpoint = map.estimate(&rs).unwrap();
        assert!(
            (from_midpoint[0] - mode).abs() < 5e-3,
            "estimate {} vs mode {}",
            from_midpoint[0],
            mode
        );
    }

    #[test]
    fn map_adapter_clamps_an_out_of_box_truth() {
        let rs = simulated(1.8, 10, 6);
        let problem = MapProblem::new(
            |th, _| Ok(-(th[0] - 2.0) * (th[0] - 2.0)),
            |_| 0.0,
            vec![(1.0, 30.0)],
        )
        .unwrap();
        let map = MapEstimator::new(problem);
        // A truth outside the box must still give a valid interior start.
        let est = map.estimate_with_truth(&rs, &[500.0]).unwrap();
        assert!((est[0] - 2.0).abs() < 1e-3, "estimate {}", est[0]);
    }
}
