//! Sampling distribution of an estimator at a fixed generating parameter.

use crate::models::{DataModel, ReplicateSet};
use crate::numerics::{Matrix, RngStream};

use super::{AssessError, Estimator};

/// Applies the estimator to `n_datasets` independent data sets of `m`
/// replicates simulated at `theta`; column k of the result holds the
/// estimate for data set k.  Data sets are simulated sequentially from
/// `rng` and estimation draws nothing, so the matrix is reproducible from
/// the stream's seed.  The output feeds density and scatter plots.
pub fn sampling_distribution(
    estimator: &dyn Estimator,
    theta: &[f64],
    model: &dyn DataModel,
    m: usize,
    n_datasets: usize,
    rng: &mut RngStream,
) -> Result<Matrix, AssessError> {
    if m == 0 || n_datasets == 0 {
        return Err(AssessError::Invalid(
            "replicate count and data set count must be at least 1".into(),
        ));
    }
    let p = model.parameter_count();
    if theta.len() != p {
        return Err(AssessError::Invalid(format!(
            "parameter has {} values, model {} expects {}",
            theta.len(),
            model.name(),
            p
        )));
    }
    let n = model.replicate_dim();
    let transform = model.default_transform();
    let prepared = model.prepare(theta)?;
    let mut out = Matrix::zeros(p, n_datasets);
    for col in 0..n_datasets {
        let mut data = vec![0.0; n * m];
        prepared.simulate_into(&mut data, m, rng)?;
        let rs = ReplicateSet::new(n, m, data, model.model_id())?.apply_transform(transform)?;
        let est = estimator.estimate_with_truth(&rs, theta)?;
        if est.len() != p {
            return Err(AssessError::Estimator(format!(
                "estimator returned {} values for {} parameters",
                est.len(),
                p
            )));
        }
        for row in 0..p {
            out.set(row, col, est[row]);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assess::OracleEstimator;
    use crate::models::{Marginal, Prior, UniformTheta};

    fn pareto_prior() -> Prior {
        Prior::new(vec![Marginal::Pareto { shape: 4.0, scale: 1.0 }]).unwrap()
    }

    #[test]
    fn oracle_estimates_dominate_the_data_maximum() {
        // The closed-form estimate is 2^{1/(alpha+m)} max(beta, max Z), so
        // every column must be at least max(beta, max Z) of its data set.
        let model = UniformTheta::default_model();
        let oracle = OracleEstimator::new(pareto_prior());
        let theta = [4.0 / 3.0];
        let draws = 500;
        let cloud = sampling_distribution(
            &oracle,
            &theta,
            &model,
            10,
            draws,
            &mut RngStream::new(111, 0),
        )
        .unwrap();
        assert_eq!(cloud.rows(), 1);
        assert_eq!(cloud.cols(), draws);

        // Replay the simulation stream to recover each data set's maximum.
        let mut rng = RngStream::new(111, 0);
        let prepared = model.prepare(&theta).unwrap();
        for col in 0..draws {
            let mut data = vec![0.0; 10];
            prepared.simulate_into(&mut data, 10, &mut rng).unwrap();
            let floor = data.iter().cloned().fold(1.0, f64::max);
            assert!(
                cloud.get(0, col) >= floor,
                "column {col}: {} below {floor}",
                cloud.get(0, col)
            );
        }
    }

    #[test]
    fn a_single_data_set_gives_one_column() {
        let model = UniformTheta::default_model();
        let oracle = OracleEstimator::new(pareto_prior());
        let cloud = sampling_distribution(
            &oracle,
            &[1.5],
            &model,
            5,
            1,
            &mut RngStream::new(112, 0),
        )
        .unwrap();
        assert_eq!((cloud.rows(), cloud.cols()), (1, 1));
    }

    #[test]
    fn reruns_with_one_seed_are_bit_identical() {
        let model = UniformTheta::default_model();
        let oracle = OracleEstimator::new(pareto_prior());
        let a = sampling_distribution(&oracle, &[1.5], &model, 7, 40, &mut RngStream::new(113, 0))
            .unwrap();
        let b = sampling_distribution(&oracle, &[1.5], &model, 7, 40, &mut RngStream::new(113, 0))
            .unwrap();
        for col in 0..40 {
            assert_eq!(a.get(0, col).to_bits(), b.get(0, col).to_bits());
        }
    }

    #[test]
    fn invalid_requests_are_rejected() {
        let model = UniformTheta::default_model();
        let oracle = OracleEstimator::new(pareto_prior());
        let mut rng = RngStream::new(0, 0);
        assert!(sampling_distribution(&oracle, &[1.5], &model, 0, 1, &mut rng).is_err());
        assert!(sampling_distribution(&oracle, &[1.5], &model, 1, 0, &mut rng).is_err());
        assert!(sampling_distribution(&oracle, &[1.5, 2.0], &model, 1, 1, &mut rng).is_err());
    }
}
