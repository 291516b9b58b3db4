//! Adam optimiser over estimator parameters.

use crate::network::{DeepSetsEstimator, Gradients};
use crate::training::TrainError;

/// First and second moment accumulators plus hyperparameters.  The moment
/// vectors are flat and follow the estimator's parameter order, so one
/// state drives either a whole estimator or a plain parameter slice.
#[derive(Clone, Debug)]
pub struct AdamState {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl AdamState {
    /// Conventional defaults: lr 1e-3, betas 0.9 and 0.999, eps 1e-8.
    pub fn new(param_count: usize) -> AdamState {
        AdamState::with_hyperparams(param_count, 1e-3, 0.9, 0.999, 1e-8)
            .expect("default hyperparameters are valid")
    }

    pub fn with_hyperparams(
        param_count: usize,
        lr: f64,
        beta1: f64,
        beta2: f64,
        eps: f64,
    ) -> Result<AdamState, TrainError> {
        if param_count == 0 {
            return Err(TrainError::Config(
                "optimiser needs at least one parameter".into(),
            ));
        }
        if !(lr.is_finite() && lr > 0.0) {
            return Err(TrainError::Config(format!(
                "learning rate must be positive, got {lr}"
            )));
        }
        for (name, b) in [("beta1", beta1), ("beta2", beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(TrainError::Config(format!(
                    "{name} must lie in [0, 1), got {b}"
                )));
            }
        }
        if !(eps.is_finite() && eps > 0.0) {
            return Err(TrainError::Config(format!(
                "epsilon must be positive, got {eps}"
            )));
        }
        Ok(AdamState {
            lr,
            beta1,
            beta2,
            eps,
            t: 0,
            m: vec![0.0; param_count],
            v: vec![0.0; param_count],
        })
    }

    pub fn param_count(&self) -> usize {
        self.m.len()
    }

    /// Completed optimiser steps.
    pub fn step_count(&self) -> u64 {
        self.t
    }

    pub fn learning_rate(&self) -> f64 {
        self.lr
    }

    // Bias-corrected moment update over one contiguous parameter segment.
    // The step count must already be advanced.
    fn update_segment(&mut self, offset: usize, params: &mut [f64], grads: &[f64]) {
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            let m = &mut self.m[offset + i];
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            let v = &mut self.v[offset + i];
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let mhat = *m / bc1;
            let vhat = *v / bc2;
            *p -= self.lr * mhat / (vhat.sqrt() + self.eps);
        }
    }

    /// One update of a flat parameter vector.
    pub fn step_flat(&mut self, params: &mut [f64], grads: &[f64]) -> Result<(), TrainError> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(TrainError::Config(format!(
                "optimiser holds {} parameters, got {} values and {} gradients",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        self.t += 1;
        self.update_segment(0, params, grads);
        Ok(())
    }

    /// One update of an estimator in place.
    pub fn step(
        &mut self,
        est: &mut DeepSetsEstimator,
        grads: &Gradients,
    ) -> Result<(), TrainError> {
        if est.param_count() != self.m.len() || grads.param_count() != self.m.len() {
            return Err(TrainError::Config(format!(
                "optimiser holds {} parameters, estimator has {} and gradients {}",
                self.m.len(),
                est.param_count(),
                grads.param_count()
            )));
        }
        self.t += 1;
        let mut at = 0;
        for (layer, g) in est.layers_mut().zip(grads.layers()) {
            if layer.weights().len() != g.weights.len() || layer.bias().len() != g.bias.len() {
                return Err(TrainError::Config(
                    "gradient layer shapes do not match the estimator".into(),
                ));
            }
            let nw = g.weights.len();
            self.update_segment(at, layer.weights_mut(), &g.weights);
            at += nw;
            let nb = g.bias.len();
            self.update_segment(at, layer.bias_mut(), &g.bias);
            at += nb;
        }
        debug_assert_eq!(at, self.m.len());
        Ok(())
    }
}
