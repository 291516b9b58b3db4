//! Routing over replicate count.
//!
//! An estimator trained at one replicate count degrades away from it, so
//! several sub-estimators are trained at increasing counts and a router
//! picks the one whose bracket contains the observed count.

use std::path::Path;

use crate::models::ReplicateSet;
use crate::network::{checkpoint, DeepSetsEstimator, NetworkError, Workspace};

/// Sub-estimators with the replicate-count brackets that select them.
/// Changepoints `m_1 < ... < m_{l-1}` route count `m` to the sub-estimator
/// `k` with `m_{k-1} < m <= m_k`; counts beyond the last changepoint go to
/// the last sub-estimator.
#[derive(Clone, Debug, PartialEq)]
pub struct PiecewiseEstimator {
    subs: Vec<DeepSetsEstimator>,
    changepoints: Vec<usize>,
    training_sizes: Vec<usize>,
}

impl PiecewiseEstimator {
    pub fn new(
        subs: Vec<DeepSetsEstimator>,
        changepoints: Vec<usize>,
        training_sizes: Vec<usize>,
    ) -> Result<PiecewiseEstimator, NetworkError> {
        if subs.is_empty() {
            return Err(NetworkError::Architecture(
                "a piecewise estimator needs at least one sub-estimator".into(),
            ));
        }
        if changepoints.len() != subs.len() - 1 {
            return Err(NetworkError::Architecture(format!(
                "{} sub-estimators need {} changepoints, got {}",
                subs.len(),
                subs.len() - 1,
                changepoints.len()
            )));
        }
        if training_sizes.len() != subs.len() {
            return Err(NetworkError::Architecture(format!(
                "{} sub-estimators need {} training sizes, got {}",
                subs.len(),
                subs.len(),
                training_sizes.len()
            )));
        }
        for seq in [&changepoints, &training_sizes] {
            if seq.first().is_some_and(|&v| v == 0) {
                return Err(NetworkError::Architecture(
                    "replicate counts start at one".into(),
                ));
            }
            if seq.windows(2).any(|w| w[0] >= w[1]) {
                return Err(NetworkError::Architecture(
                    "changepoints and training sizes must increase strictly".into(),
                ));
            }
        }
        let (n, p) = (subs[0].n(), subs[0].p());
        if subs.iter().any(|s| s.n() != n || s.p() != p) {
            return Err(NetworkError::Architecture(
                "sub-estimators must share data and parameter dimensions".into(),
            ));
        }
        Ok(PiecewiseEstimator {
            subs,
            changepoints,
            training_sizes,
        })
    }

    /// A router with a single bracket, equivalent to the bare estimator.
    pub fn single(
        est: DeepSetsEstimator,
        training_size: usize,
    ) -> Result<PiecewiseEstimator, NetworkError> {
        PiecewiseEstimator::new(vec![est], vec![], vec![training_size])
    }

    pub fn n(&self) -> usize {
        self.subs[0].n()
    }

    pub fn p(&self) -> usize {
        self.subs[0].p()
    }

    pub fn len(&self) -> usize {
        self.subs.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn subs(&self) -> &[DeepSetsEstimator] {
        &self.subs
    }

    pub fn sub(&self, k: usize) -> &DeepSetsEstimator {
        &self.subs[k]
    }

    pub fn changepoints(&self) -> &[usize] {
        &self.changepoints
    }

    pub fn training_sizes(&self) -> &[usize] {
        &self.training_sizes
    }

    /// Index of the sub-estimator that handles `m` replicates.
    pub fn route(&self, m: usize) -> usize {
        self.changepoints.partition_point(|&c| c < m)
    }

    pub fn estimate(&self, rs: &ReplicateSet) -> Result<Vec<f64>, NetworkError> {
        self.subs[self.route(rs.m())].estimate(rs)
    }

    pub fn estimate_with(
        &self,
        rs: &ReplicateSet,
        ws: &mut Workspace,
    ) -> Result<Vec<f64>, NetworkError> {
        self.subs[self.route(rs.m())].estimate_with(rs, ws)
    }

    /// Write a checkpoint directory: a JSON manifest plus one binary blob of
    /// little-endian weights per sub-estimator.
    pub fn save(&self, dir: &Path) -> Result<(), NetworkError> {
        checkpoint::save(self, dir)
    }

    pub fn load(dir: &Path) -> Result<PiecewiseEstimator, NetworkError> {
        checkpoint::load(dir)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::model_id;
    use crate::network::{Activation, DenseLayer, ExpertStats, Mlp};
    use crate::numerics::RngStream;

    // A sub-estimator that outputs the constant `value` for any data, so
    // routing decisions are visible in the estimate.
    fn constant_estimator(value: f64) -> DeepSetsEstimator {
        let psi = Mlp::new(vec![
            DenseLayer::new(1, 1, vec![0.0], vec![0.0], Activation::Relu).unwrap(),
        ])
        .unwrap();
        let phi = Mlp::new(vec![
            DenseLayer::new(1, 1, vec![0.0], vec![value], Activation::Identity).unwrap(),
        ])
        .unwrap();
        DeepSetsEstimator::new(psi, phi, ExpertStats::None).unwrap()
    }

    fn set_of(m: usize) -> ReplicateSet {
        ReplicateSet::new(1, m, vec![0.5; m], model_id::CUSTOM).unwrap()
    }

    #[test]
    fn routes_by_replicate_count_brackets() {
        let subs = (0..5).map(|k| constant_estimator(k as f64)).collect();
        let pw = PiecewiseEstimator::new(subs, vec![1, 20, 50, 100], vec![1, 10, 35, 75, 150])
            .unwrap();
        for (m, want) in [
            (1, 0),
            (2, 1),
            (20, 1),
            (21, 2),
            (50, 2),
            (100, 3),
            (101, 4),
            (1000, 4),
        ] {
            assert_eq!(pw.route(m), want, "m = {m}");
            assert_eq!(pw.estimate(&set_of(m)).unwrap(), vec![want as f64]);
        }
    }

    #[test]
    fn single_sub_estimator_matches_the_bare_estimator() {
        let mut rng = RngStream::new(41, 0);
        let est = DeepSetsEstimator::with_architecture(
            2,
            2,
            4,
            &[6],
            &[5],
            ExpertStats::quantiles(vec![0.5]).unwrap(),
            &mut rng,
        )
        .unwrap();
        let pw = PiecewiseEstimator::single(est.clone(), 10).unwrap();
        for m in 1..=12 {
            let data = (0..2 * m).map(|_| rng.uniform(-2.0, 2.0)).collect();
            let rs = ReplicateSet::new(2, m, data, model_id::CUSTOM).unwrap();
            assert_eq!(pw.estimate(&rs).unwrap(), est.estimate(&rs).unwrap());
        }
    }

    #[test]
    fn constructor_rejects_inconsistent_pieces() {
        let subs = || (0..3).map(|k| constant_estimator(k as f64)).collect::<Vec<_>>();
        assert!(PiecewiseEstimator::new(vec![], vec![], vec![]).is_err());
        assert!(PiecewiseEstimator::new(subs(), vec![1], vec![1, 2, 3]).is_err());
        assert!(PiecewiseEstimator::new(subs(), vec![5, 5], vec![1, 2, 3]).is_err());
        assert!(PiecewiseEstimator::new(subs(), vec![0, 5], vec![1, 2, 3]).is_err());
        assert!(PiecewiseEstimator::new(subs(), vec![1, 5], vec![1, 2]).is_err());
        assert!(PiecewiseEstimator::new(subs(), vec![1, 5], vec![1, 2, 2]).is_err());
        let mut mixed = subs();
        mixed[1] = {
            let mut rng = RngStream::new(42, 0);
            DeepSetsEstimator::with_architecture(2, 1, 2, &[3], &[3], ExpertStats::None, &mut rng)
                .unwrap()
        };
        assert!(PiecewiseEstimator::new(mixed, vec![1, 5], vec![1, 2, 3]).is_err());
    }
}
