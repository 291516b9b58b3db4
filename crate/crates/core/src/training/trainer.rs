//! The training loop: simulated data, minibatch gradient steps, validation
//! risk tracking and early stopping.
//!
//! All randomness descends from one seed through tagged child streams, so a
//! run is a deterministic function of (config, model, initial weights)
//! regardless of refresh mode or batch order.

use std::time::Instant;

use crate::models::{sample_prior, DataModel, ParameterSample, ReplicateSet, Transform};
use crate::network::{DeepSetsEstimator, PiecewiseEstimator, Workspace};
use crate::numerics::RngStream;
use crate::training::{
    mc_bayes_risk, sample_replicates, AdamState, AffineScale, LossSpec, ReplicateDist, TrainError,
};

/// When the simulated training data are regenerated. Parameter draws stay
/// fixed for the whole run; only their data sets are refreshed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Refresh {
    /// Fresh data for every minibatch, simulated immediately before its
    /// gradient step; no epoch reuses a draw and peak memory stays at one
    /// minibatch of data.
    OnTheFly,
    /// Regenerate the pooled data every `k` epochs.
    Every(usize),
    /// One pool, reused for the whole run.
    Fixed,
}

/// Everything a training run needs beyond the model and the initial weights.
#[derive(Clone, Debug)]
pub struct TrainConfig {
    /// Parameter draws in the training set.
    pub train_draws: usize,
    /// Parameter draws in the validation set.
    pub val_draws: usize,
    /// Simulated data sets per parameter draw.
    pub sets_per_draw: usize,
    /// Parameter draws per gradient step.
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Consecutive epochs without validation improvement before stopping.
    pub patience: usize,
    pub refresh: Refresh,
    /// Replicate count for each simulated data set.
    pub replicate_dist: ReplicateDist,
    pub max_epochs: usize,
    pub seed: u64,
    /// Loss optimised during training and reported as validation risk.
    pub loss: LossSpec,
}

impl TrainConfig {
    pub fn new(replicate_dist: ReplicateDist, seed: u64) -> TrainConfig {
        TrainConfig {
            train_draws: 10_000,
            val_draws: 2_000,
            sets_per_draw: 10,
            batch_size: 32,
            learning_rate: 1e-3,
            patience: 5,
            refresh: Refresh::OnTheFly,
            replicate_dist,
            max_epochs: 200,
            seed,
            loss: LossSpec::absolute(),
        }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let counts = [
            ("train_draws", self.train_draws),
            ("val_draws", self.val_draws),
            ("sets_per_draw", self.sets_per_draw),
            ("batch_size", self.batch_size),
            ("patience", self.patience),
            ("max_epochs", self.max_epochs),
        ];
        for (name, value) in counts {
            if value == 0 {
                return Err(TrainError::Config(format!("{name} must be at least 1")));
            }
        }
        if let Refresh::Every(k) = self.refresh {
            if k == 0 {
                return Err(TrainError::Config(
                    "refresh period must be at least 1 epoch".into(),
                ));
            }
        }
        if !self.learning_rate.is_finite() || self.learning_rate <= 0.0 {
            return Err(TrainError::Config(format!(
                "learning rate must be positive and finite, got {}",
                self.learning_rate
            )));
        }
        self.replicate_dist.validate()?;
        if !self.loss.differentiable() {
            return Err(TrainError::Config(
                "training needs a differentiable loss; zero-one is assessment-only".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    /// Validation risk failed to improve for `patience` consecutive epochs.
    EarlyStop,
    MaxEpochs,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochRecord {
    /// 1-based epoch number.
    pub epoch: usize,
    pub train_risk: f64,
    pub val_risk: f64,
    pub seconds: f64,
}

/// What happened during a run. The returned estimator always carries the
/// weights of `best_epoch`, the epoch with minimal validation risk.
#[derive(Clone, Debug)]
pub struct TrainingRun {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub stop_reason: StopReason,
    /// Optimiser steps over the whole run, one per minibatch.
    pub adam_steps: u64,
}

impl TrainingRun {
    pub fn best_val_risk(&self) -> f64 {
        self.epochs[self.best_epoch - 1].val_risk
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_risk,val_risk,seconds\n");
        for r in &self.epochs {
            out.push_str(&format!(
                "{},{:.16e},{:.16e},{:.3}\n",
                r.epoch, r.train_risk, r.val_risk, r.seconds
            ));
        }
        out
    }
}

/// Simulate `sets` data sets at one parameter vector, replicate counts drawn
/// from `dist`, with `transform` applied to each set.
fn simulate_draw(
    model: &dyn DataModel,
    theta: &[f64],
    sets: usize,
    dist: ReplicateDist,
    transform: Transform,
    rng: &mut RngStream,
) -> Result<Vec<ReplicateSet>, crate::models::ModelError> {
    let prepared = model.prepare(theta)?;
    let n = model.replicate_dim();
    let mut group = Vec::with_capacity(sets);
    for _ in 0..sets {
        let m = sample_replicates(dist, rng);
        let mut data = vec![0.0; n * m];
        prepared.simulate_into(&mut data, m, rng)?;
        group.push(ReplicateSet::new(n, m, data, model.model_id())?.apply_transform(transform)?);
    }
    Ok(group)
}

fn build_datasets(
    model: &dyn DataModel,
    vartheta: &ParameterSample,
    sets: usize,
    dist: ReplicateDist,
    rng: &mut RngStream,
) -> Result<Vec<Vec<ReplicateSet>>, TrainError> {
    let transform = model.default_transform();
    let mut out = Vec::with_capacity(vartheta.count());
    for (index, theta) in vartheta.columns().enumerate() {
        let group = simulate_draw(model, theta, sets, dist, transform, rng)
            .map_err(|source| TrainError::Simulation { index, source })?;
        out.push(group);
    }
    Ok(out)
}

/// Apply the default per-parameter rescaling when the loss carries none, the
/// model has at least three parameters, and every prior marginal is bounded.
/// Without it, wide-range parameters dominate the gradient.
fn resolve_loss(spec: &LossSpec, model: &dyn DataModel) -> Result<LossSpec, TrainError> {
    let p = model.parameter_count();
    if let Some(dim) = spec.scaling_dim() {
        if dim != p {
            return Err(TrainError::Config(format!(
                "loss scales {dim} parameters, model {} has {p}",
                model.name()
            )));
        }
        return Ok(spec.clone());
    }
    let prior = model.prior();
    if p >= 3 && prior.all_bounded() {
        let scales = prior
            .marginals()
            .iter()
            .map(|m| {
                let (lo, hi) = m.bounds();
                AffineScale::from_bounds(lo, hi)
            })
            .collect::<Result<Vec<_>, _>>()?;
        spec.clone().with_scaling(scales)
    } else {
        Ok(spec.clone())
    }
}

/// Fit the estimator to the model by simulation.
///
/// Parameter draws are sampled once from the model's prior and held fixed;
/// their data sets are refreshed per `config.refresh`. Validation draws and
/// data are simulated once and never refreshed. Stops early after `patience`
/// consecutive epochs without a new validation minimum, and always returns
/// the weights of the best epoch.
pub fn train(
    est: DeepSetsEstimator,
    model: &dyn DataModel,
    config: &TrainConfig,
) -> Result<(DeepSetsEstimator, TrainingRun), TrainError> {
    config.validate()?;
    if est.n() != model.replicate_dim() {
        return Err(TrainError::Config(format!(
            "estimator reads replicates of dimension {}, model {} produces dimension {}",
            est.n(),
            model.name(),
            model.replicate_dim()
        )));
    }
    if est.p() != model.parameter_count() {
        return Err(TrainError::Config(format!(
            "estimator outputs {} parameters, model {} has {}",
            est.p(),
            model.name(),
            model.parameter_count()
        )));
    }
    let loss = resolve_loss(&config.loss, model)?;
    let transform = model.default_transform();
    let prior = model.prior();

    // Independent child streams; the numbering is part of the reproducibility
    // contract (a run is replayable from the seed alone).
    let root = RngStream::new(config.seed, 0);
    let mut theta_rng = root.split(1);
    let mut val_theta_rng = root.split(2);
    let mut val_data_rng = root.split(3);
    let mut shuffle_rng = root.split(4);
    let data_root = root.split(5);

    let vartheta = sample_prior(prior, config.train_draws, &mut theta_rng);
    let val_vartheta = sample_prior(prior, config.val_draws, &mut val_theta_rng);
    let val_datasets = build_datasets(
        model,
        &val_vartheta,
        config.sets_per_draw,
        config.replicate_dist,
        &mut val_data_rng,
    )?;

    let mut est = est;
    let mut adam = AdamState::with_hyperparams(
        est.param_count(),
        config.learning_rate,
        0.9,
        0.999,
        1e-8,
    )?;
    let mut ws = Workspace::new();
    let mut grads = est.zero_gradients();

    let mut pool = match config.refresh {
        Refresh::OnTheFly => None,
        Refresh::Fixed | Refresh::Every(_) => {
            let mut pool_rng = data_root.split(0);
            Some(build_datasets(
                model,
                &vartheta,
                config.sets_per_draw,
                config.replicate_dist,
                &mut pool_rng,
            )?)
        }
    };

    let mut order: Vec<usize> = (0..config.train_draws).collect();
    let mut records = Vec::new();
    let mut best_epoch = 0usize;
    let mut best_val = f64::INFINITY;
    let mut best_params = est.params_flat();
    let mut bad_streak = 0usize;
    let mut adam_steps = 0u64;
    let mut stop_reason = StopReason::MaxEpochs;

    for epoch in 1..=config.max_epochs {
        let start = Instant::now();
        if let Refresh::Every(k) = config.refresh {
            if epoch > 1 && (epoch - 1) % k == 0 {
                let mut refresh_rng = data_root.split(epoch as u64);
                pool = Some(build_datasets(
                    model,
                    &vartheta,
                    config.sets_per_draw,
                    config.replicate_dist,
                    &mut refresh_rng,
                )?);
            }
        }
        shuffle_rng.shuffle(&mut order);
        // Fresh data is keyed by (epoch, draw index), not batch position, so
        // the simulated values are independent of the shuffle.
        let batch_root = data_root.split(epoch as u64);
        let mut loss_sum = 0.0;
        let mut items = 0usize;
        for chunk in order.chunks(config.batch_size) {
            let fresh = match &pool {
                Some(_) => None,
                None => {
                    let mut groups = Vec::with_capacity(chunk.len());
                    for &k in chunk {
                        let mut draw_rng = batch_root.split(k as u64);
                        let group = simulate_draw(
                            model,
                            vartheta.column(k),
                            config.sets_per_draw,
                            config.replicate_dist,
                            transform,
                            &mut draw_rng,
                        )
                        .map_err(|source| TrainError::Simulation { index: k, source })?;
                        groups.push(group);
                    }
                    Some(groups)
                }
            };
            let mut batch: Vec<(&[f64], &ReplicateSet)> =
                Vec::with_capacity(chunk.len() * config.sets_per_draw);
            match (&pool, &fresh) {
                (Some(pool), _) => {
                    for &k in chunk {
                        let theta = vartheta.column(k);
                        batch.extend(pool[k].iter().map(|rs| (theta, rs)));
                    }
                }
                (None, Some(fresh)) => {
                    for (i, &k) in chunk.iter().enumerate() {
                        let theta = vartheta.column(k);
                        batch.extend(fresh[i].iter().map(|rs| (theta, rs)));
                    }
                }
                (None, None) => unreachable!("a batch is pooled or fresh"),
            }
            let mean = est.backward(&batch, &loss, &mut ws, &mut grads)?;
            if !mean.is_finite() {
                return Err(TrainError::Diverged { epoch, risk: mean });
            }
            adam.step(&mut est, &grads)?;
            adam_steps += 1;
            loss_sum += mean * batch.len() as f64;
            items += batch.len();
        }
        let train_risk = loss_sum / items as f64;
        if !train_risk.is_finite() {
            return Err(TrainError::Diverged {
                epoch,
                risk: train_risk,
            });
        }
        let (val_risk, _) = mc_bayes_risk(&est, &val_vartheta, &val_datasets, &loss)?;
        if !val_risk.is_finite() {
            return Err(TrainError::Diverged {
                epoch,
                risk: val_risk,
            });
        }
        records.push(EpochRecord {
            epoch,
            train_risk,
            val_risk,
            seconds: start.elapsed().as_secs_f64(),
        });
        if val_risk < best_val {
            best_val = val_risk;
            best_epoch = epoch;
            best_params = est.params_flat();
            bad_streak = 0;
        } else {
            bad_streak += 1;
            if bad_streak >= config.patience {
                stop_reason = StopReason::EarlyStop;
                break;
            }
        }
    }

    est.set_params_flat(&best_params)?;
    Ok((
        est,
        TrainingRun {
            epochs: records,
            best_epoch,
            stop_reason,
            adam_steps,
        },
    ))
}

/// Train one sub-estimator per stage size, warm-starting each stage from the
/// previous stage's trained weights, and assemble the results into a
/// replicate-count router.
///
/// `sizes[k]` is the fixed replicate count stage `k` trains at; the stage
/// that serves counts up to `changepoints[k]` must train at a size no larger
/// than that bound. Stage seeds derive from `config.seed` so the chain is
/// reproducible end to end.
pub fn pretrain_chain(
    template: DeepSetsEstimator,
    model: &dyn DataModel,
    sizes: &[usize],
    changepoints: &[usize],
    config: &TrainConfig,
) -> Result<(PiecewiseEstimator, Vec<TrainingRun>), TrainError> {
    if sizes.is_empty() {
        return Err(TrainError::Config(
            "pre-training needs at least one stage size".into(),
        ));
    }
    if sizes[0] == 0 {
        return Err(TrainError::Config(
            "stage sizes must be at least 1".into(),
        ));
    }
    if sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(TrainError::Config(format!(
            "stage sizes must be strictly increasing, got {sizes:?}"
        )));
    }
    if changepoints.len() + 1 != sizes.len() {
        return Err(TrainError::Config(format!(
            "{} stages need {} changepoints, got {}",
            sizes.len(),
            sizes.len() - 1,
            changepoints.len()
        )));
    }
    for (k, (&size, &cp)) in sizes.iter().zip(changepoints).enumerate() {
        if size > cp {
            return Err(TrainError::Config(format!(
                "stage {k} trains at {size} replicates but serves counts up to {cp}"
            )));
        }
    }

    let mut subs = Vec::with_capacity(sizes.len());
    let mut runs = Vec::with_capacity(sizes.len());
    let mut init = template;
    for (k, &size) in sizes.iter().enumerate() {
        let mut stage = config.clone();
        stage.replicate_dist = ReplicateDist::Fixed(size);
        stage.seed = config.seed.wrapping_add(k as u64);
        let (trained, run) = train(init, model, &stage)?;
        init = trained.clone();
        subs.push(trained);
        runs.push(run);
    }
    let router = PiecewiseEstimator::new(subs, changepoints.to_vec(), sizes.to_vec())?;
    Ok((router, runs))
}
