//! Monte-Carlo Bayes risk and the replicate-count distribution.

use crate::assess::Estimator;
use crate::models::{ParameterSample, ReplicateSet};
use crate::numerics::RngStream;
use crate::training::{LossSpec, TrainError};

/// Replicate count per simulated data set: a constant, or uniform over an
/// inclusive integer range so one estimator learns to handle any size in it.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReplicateDist {
    Fixed(usize),
    Uniform { lo: usize, hi: usize },
}

impl ReplicateDist {
    pub fn validate(&self) -> Result<(), TrainError> {
        match *self {
            ReplicateDist::Fixed(m) if m >= 1 => Ok(()),
            ReplicateDist::Fixed(m) => Err(TrainError::Config(format!(
                "replicate count must be at least 1, got {m}"
            ))),
            ReplicateDist::Uniform { lo, hi } if lo >= 1 && lo <= hi => Ok(()),
            ReplicateDist::Uniform { lo, hi } => Err(TrainError::Config(format!(
                "replicate range needs 1 <= lo <= hi, got [{lo}, {hi}]"
            ))),
        }
    }

    pub fn max(&self) -> usize {
        match *self {
            ReplicateDist::Fixed(m) => m,
            ReplicateDist::Uniform { hi, .. } => hi,
        }
    }
}

/// Draw a replicate count.
pub fn sample_replicates(dist: ReplicateDist, rng: &mut RngStream) -> usize {
    match dist {
        ReplicateDist::Fixed(m) => m,
        ReplicateDist::Uniform { lo, hi } => lo + rng.u64_below((hi - lo + 1) as u64) as usize,
    }
}

/// Double Monte-Carlo average of the loss: over parameter draws, and over
/// the data sets simulated per draw.  Returns the risk and its standard
/// error across parameter draws.
///
/// Loss values are accumulated in sorted order, so the result is exactly
/// invariant to reordering the parameter draws (with their data) and to
/// reordering the data sets within a draw.
pub fn mc_bayes_risk<E: Estimator + ?Sized>(
    estimator: &E,
    vartheta: &ParameterSample,
    datasets: &[Vec<ReplicateSet>],
    spec: &LossSpec,
) -> Result<(f64, f64), TrainError> {
    if datasets.len() != vartheta.count() {
        return Err(TrainError::Config(format!(
            "{} parameter draws but {} data set groups",
            vartheta.count(),
            datasets.len()
        )));
    }
    if datasets.iter().any(Vec::is_empty) {
        return Err(TrainError::Config(
            "every parameter draw needs at least one data set".into(),
        ));
    }
    let mut means = Vec::with_capacity(datasets.len());
    let mut losses = Vec::new();
    for (k, sets) in datasets.iter().enumerate() {
        let theta = vartheta.column(k);
        losses.clear();
        for rs in sets {
            let estimate = estimator.estimate_with_truth(rs, theta)?;
            losses.push(spec.value(&estimate, theta));
        }
        means.push(sorted_mean(&mut losses));
    }
    Ok(pooled_risk(means))
}

/// Mean taken after sorting, so accumulation order cannot leak into the
/// result.  Clears the buffer's order as a side effect.
pub(crate) fn sorted_mean(values: &mut [f64]) -> f64 {
    values.sort_unstable_by(f64::total_cmp);
    values.iter().sum::<f64>() / values.len() as f64
}

/// Outer reduction shared by every risk report: mean of the per-draw means
/// in sorted order, plus the standard error of that mean across draws (zero
/// for a single draw).
pub(crate) fn pooled_risk(mut means: Vec<f64>) -> (f64, f64) {
    means.sort_unstable_by(f64::total_cmp);
    let count = means.len() as f64;
    let risk = means.iter().sum::<f64>() / count;
    let se = if means.len() > 1 {
        let var = means.iter().map(|x| (x - risk).powi(2)).sum::<f64>() / (count - 1.0);
        (var / count).sqrt()
    } else {
        0.0
    };
    (risk, se)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assess::AssessError;
    use crate::models::model_id;
    use crate::network::{DeepSetsEstimator, ExpertStats};

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    /// Test estimator that echoes the generating parameter.
    struct PerfectOracle;

    impl Estimator for PerfectOracle {
        fn estimate(&self, _rs: &ReplicateSet) -> Result<Vec<f64>, AssessError> {
            Err(AssessError::Estimator(
                "oracle needs the truth".into(),
            ))
        }

        fn estimate_with_truth(
            &self,
            _rs: &ReplicateSet,
            truth: &[f64],
        ) -> Result<Vec<f64>, AssessError> {
            Ok(truth.to_vec())
        }
    }

    /// Test estimator that always answers with a constant.
    struct ConstantEstimator(Vec<f64>);

    impl Estimator for ConstantEstimator {
        fn estimate(&self, _rs: &ReplicateSet) -> Result<Vec<f64>, AssessError> {
            Ok(self.0.clone())
        }
    }

    fn one_set(value: f64) -> ReplicateSet {
        ReplicateSet::new(1, 1, vec![value], model_id::CUSTOM).unwrap()
    }

    fn sample(draws: &[f64]) -> ParameterSample {
        ParameterSample::from_flat(1, draws.to_vec())
    }

    #[test]
    fn single_draw_single_set_is_one_loss_value() {
        let vartheta = sample(&[1.0]);
        let datasets = vec![vec![one_set(0.0)]];
        let est = ConstantEstimator(vec![1.5]);
        let (risk, se) =
            mc_bayes_risk(&est, &vartheta, &datasets, &LossSpec::absolute()).unwrap();
        assert_close(risk, 0.5, 1e-15);
        assert_eq!(se, 0.0);
    }

    #[test]
    fn perfect_oracle_has_zero_risk() {
        let vartheta = sample(&[0.5, 1.5, 4.0]);
        let datasets: Vec<Vec<ReplicateSet>> =
            (0..3).map(|_| vec![one_set(0.1), one_set(0.2)]).collect();
        let (risk, se) =
            mc_bayes_risk(&PerfectOracle, &vartheta, &datasets, &LossSpec::squared()).unwrap();
        assert_eq!(risk, 0.0);
        assert_eq!(se, 0.0);
    }

    #[test]
    fn two_draws_average_their_losses() {
        // Absolute losses 0.2 and 0.4 against the constant estimate.
        let vartheta = sample(&[1.2, 0.6]);
        let datasets = vec![vec![one_set(0.0)], vec![one_set(0.0)]];
        let est = ConstantEstimator(vec![1.0]);
        let (risk, se) =
            mc_bayes_risk(&est, &vartheta, &datasets, &LossSpec::absolute()).unwrap();
        assert_close(risk, 0.3, 1e-15);
        // Standard error of the mean of {0.2, 0.4}.
        assert_close(se, 0.1, 1e-12);
    }

    #[test]
    fn risk_is_exactly_invariant_to_reordering() {
        let mut rng = RngStream::new(66, 0);
        let est = DeepSetsEstimator::with_architecture(
            1,
            1,
            3,
            &[5],
            &[4],
            ExpertStats::None,
            &mut rng,
        )
        .unwrap();
        let draws: Vec<f64> = (0..7).map(|_| rng.uniform(0.5, 3.0)).collect();
        let vartheta = sample(&draws);
        let datasets: Vec<Vec<ReplicateSet>> = (0..7)
            .map(|_| {
                (0..3)
                    .map(|_| {
                        let m = 1 + rng.u64_below(5) as usize;
                        let data = (0..m).map(|_| rng.uniform(0.0, 3.0)).collect();
                        ReplicateSet::new(1, m, data, model_id::CUSTOM).unwrap()
                    })
                    .collect()
            })
            .collect();
        let spec = LossSpec::absolute();
        let (risk, se) = mc_bayes_risk(&est, &vartheta, &datasets, &spec).unwrap();

        // Reverse the parameter draws with their data and shuffle the data
        // sets within each draw.
        let order: Vec<usize> = (0..7).rev().collect();
        let perm_draws: Vec<f64> = order.iter().map(|&k| draws[k]).collect();
        let perm_vartheta = sample(&perm_draws);
        let mut perm_datasets: Vec<Vec<ReplicateSet>> = order
            .iter()
            .map(|&k| datasets[k].clone())
            .collect();
        for group in perm_datasets.iter_mut() {
            group.rotate_left(1);
        }
        let (risk2, se2) = mc_bayes_risk(&est, &perm_vartheta, &perm_datasets, &spec).unwrap();
        assert_eq!(risk.to_bits(), risk2.to_bits());
        assert_eq!(se.to_bits(), se2.to_bits());
    }

    #[test]
    fn misaligned_or_empty_inputs_are_rejected() {
        let vartheta = sample(&[1.0, 2.0]);
        let est = ConstantEstimator(vec![1.0]);
        let spec = LossSpec::absolute();
        let short = vec![vec![one_set(0.0)]];
        assert!(mc_bayes_risk(&est, &vartheta, &short, &spec).is_err());
        let with_empty = vec![vec![one_set(0.0)], vec![]];
        assert!(mc_bayes_risk(&est, &vartheta, &with_empty, &spec).is_err());
    }

    #[test]
    fn fixed_replicate_count_is_constant() {
        let mut rng = RngStream::new(67, 0);
        for _ in 0..10 {
            assert_eq!(sample_replicates(ReplicateDist::Fixed(10), &mut rng), 10);
        }
        assert_eq!(sample_replicates(ReplicateDist::Uniform { lo: 1, hi: 1 }, &mut rng), 1);
    }

    #[test]
    fn uniform_replicate_counts_cover_the_range_evenly() {
        let dist = ReplicateDist::Uniform { lo: 1, hi: 150 };
        let mut rng = RngStream::new(68, 0);
        let draws = 100_000usize;
        let mut counts = vec![0u32; 151];
        for _ in 0..draws {
            let m = sample_replicates(dist, &mut rng);
            assert!((1..=150).contains(&m));
            counts[m] += 1;
        }
        // Each cell is Binomial(draws, 1/150); allow three standard
        // deviations around the expectation.
        let p = 1.0 / 150.0;
        let mean = draws as f64 * p;
        let sd = (draws as f64 * p * (1.0 - p)).sqrt();
        for m in 1..=150 {
            let dev = (f64::from(counts[m]) - mean).abs();
            assert!(dev <= 3.0 * sd, "count {m}: {} vs {mean}", counts[m]);
        }
    }

    #[test]
    fn replicate_count_validation() {
        assert!(ReplicateDist::Fixed(0).validate().is_err());
        assert!(ReplicateDist::Uniform { lo: 0, hi: 5 }.validate().is_err());
        assert!(ReplicateDist::Uniform { lo: 6, hi: 5 }.validate().is_err());
        assert!(ReplicateDist::Uniform { lo: 1, hi: 150 }.validate().is_ok());
        assert_eq!(ReplicateDist::Uniform { lo: 1, hi: 150 }.max(), 150);
        assert_eq!(ReplicateDist::Fixed(7).max(), 7);
    }
}
