//! Loss functions over parameter vectors.
//!
//! A loss compares an estimate to the truth one parameter at a time and
//! reduces by the mean, so parameter count does not change the scale of
//! risks.  An optional per-parameter affine rescale keeps wide-range
//! parameters from dominating multi-parameter gradients.

use crate::training::TrainError;

/// Elementwise loss family.
#[derive(Clone, Debug, PartialEq)]
pub enum LossKind {
    Absolute,
    Squared,
    /// Per parameter: 0 when the estimate lands within `tolerance` of the
    /// truth in relative terms, else 1.  Assessment only; no gradient.
    ZeroOne { tolerance: f64 },
    /// Pinball loss; training at probability `prob` yields a posterior
    /// quantile estimator instead of a central point estimator.
    Quantile { prob: f64 },
}

impl LossKind {
    /// Stable name used in report rows and command-line flags.
    pub fn label(&self) -> &'static str {
        match self {
            LossKind::Absolute => "absolute",
            LossKind::Squared => "squared",
            LossKind::ZeroOne { .. } => "zero_one",
            LossKind::Quantile { .. } => "quantile",
        }
    }
}

/// Per-parameter map `x -> (x - offset) * scale` applied to estimate and
/// truth alike before the elementwise loss.  Every supported loss depends
/// only on differences, so the offset never changes a loss value; it is kept
/// so a configured map reads as the natural `[lo, hi] -> [0, 1]` rescale.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AffineScale {
    pub offset: f64,
    pub scale: f64,
}

impl AffineScale {
    pub fn identity() -> AffineScale {
        AffineScale {
            offset: 0.0,
            scale: 1.0,
        }
    }

    /// The map sending `[lo, hi]` to `[0, 1]`.
    pub fn from_bounds(lo: f64, hi: f64) -> Result<AffineScale, TrainError> {
        if !lo.is_finite() || !hi.is_finite() || hi <= lo {
            return Err(TrainError::Config(format!(
                "scaling bounds must be finite with lo < hi, got [{lo}, {hi}]"
            )));
        }
        Ok(AffineScale {
            offset: lo,
            scale: 1.0 / (hi - lo),
        })
    }

    fn validate(&self) -> Result<(), TrainError> {
        if !self.offset.is_finite() || !self.scale.is_finite() || self.scale <= 0.0 {
            return Err(TrainError::Config(format!(
                "scaling must have finite offset and positive scale, got offset {} scale {}",
                self.offset, self.scale
            )));
        }
        Ok(())
    }
}

/// A loss kind plus optional parameter scaling.
#[derive(Clone, Debug, PartialEq)]
pub struct LossSpec {
    kind: LossKind,
    scaling: Option<Vec<AffineScale>>,
    // Per-parameter absolute tolerance used by the zero-one loss when the
    // true value is exactly zero, where a relative criterion is undefined.
    zero_fallback: Option<Vec<f64>>,
}

impl LossSpec {
    pub fn absolute() -> LossSpec {
        LossSpec {
            kind: LossKind::Absolute,
            scaling: None,
            zero_fallback: None,
        }
    }

    pub fn squared() -> LossSpec {
        LossSpec {
            kind: LossKind::Squared,
            scaling: None,
            zero_fallback: None,
        }
    }

    pub fn zero_one(tolerance: f64) -> Result<LossSpec, TrainError> {
        if !tolerance.is_finite() || tolerance <= 0.0 {
            return Err(TrainError::Config(format!(
                "zero-one tolerance must be positive, got {tolerance}"
            )));
        }
        Ok(LossSpec {
            kind: LossKind::ZeroOne { tolerance },
            scaling: None,
            zero_fallback: None,
        })
    }

    /// Zero-one at the conventional 10% relative tolerance.
    pub fn zero_one_default() -> LossSpec {
        LossSpec::zero_one(0.10).expect("0.10 is a valid tolerance")
    }

    pub fn quantile(prob: f64) -> Result<LossSpec, TrainError> {
        if !prob.is_finite() || prob <= 0.0 || prob >= 1.0 {
            return Err(TrainError::Config(format!(
                "quantile probability must lie in (0, 1), got {prob}"
            )));
        }
        Ok(LossSpec {
            kind: LossKind::Quantile { prob },
            scaling: None,
            zero_fallback: None,
        })
    }

    pub fn with_scaling(mut self, scaling: Vec<AffineScale>) -> Result<LossSpec, TrainError> {
        if scaling.is_empty() {
            return Err(TrainError::Config(
                "scaling needs at least one parameter".into(),
            ));
        }
        for s in &scaling {
            s.validate()?;
        }
        self.scaling = Some(scaling);
        Ok(self)
    }

    /// For the zero-one loss only: when a true parameter is exactly zero,
    /// count a hit when the estimate lands within the given absolute
    /// tolerance instead of applying the (degenerate) relative criterion.
    pub fn with_zero_fallback(mut self, tolerances: Vec<f64>) -> Result<LossSpec, TrainError> {
        if !matches!(self.kind, LossKind::ZeroOne { .. }) {
            return Err(TrainError::Config(
                "zero-truth fallback only applies to the zero-one loss".into(),
            ));
        }
        if tolerances.is_empty() || !tolerances.iter().all(|t| t.is_finite() && *t > 0.0) {
            return Err(TrainError::Config(
                "zero-truth fallback tolerances must be positive and finite".into(),
            ));
        }
        self.zero_fallback = Some(tolerances);
        Ok(self)
    }

    pub fn kind(&self) -> &LossKind {
        &self.kind
    }

    pub fn scaling(&self) -> Option<&[AffineScale]> {
        self.scaling.as_deref()
    }

    pub fn zero_fallback(&self) -> Option<&[f64]> {
        self.zero_fallback.as_deref()
    }

    /// Length the parameter vectors must have when scaling is set.
    pub fn scaling_dim(&self) -> Option<usize> {
        self.scaling.as_ref().map(Vec::len)
    }

    /// False only for the zero-one loss, which has a flat gradient almost
    /// everywhere and is therefore restricted to assessment.
    pub fn differentiable(&self) -> bool {
        !matches!(self.kind, LossKind::ZeroOne { .. })
    }

    fn check_pair(&self, theta_hat: &[f64], theta: &[f64]) -> usize {
        assert_eq!(
            theta_hat.len(),
            theta.len(),
            "estimate and truth must have equal length"
        );
        assert!(!theta.is_empty(), "loss needs at least one parameter");
        if let Some(s) = &self.scaling {
            assert_eq!(s.len(), theta.len(), "scaling dimension mismatch");
        }
        if let Some(f) = &self.zero_fallback {
            assert_eq!(f.len(), theta.len(), "zero fallback dimension mismatch");
        }
        theta.len()
    }

    // Scaled difference estimate minus truth, and the scale factor that a
    // gradient in the scaled variable picks up by the chain rule.
    fn scaled_diff(&self, j: usize, est: f64, truth: f64) -> (f64, f64) {
        match &self.scaling {
            None => (est - truth, 1.0),
            Some(s) => ((est - truth) * s[j].scale, s[j].scale),
        }
    }

    /// Mean over parameters of the elementwise loss.
    pub fn value(&self, theta_hat: &[f64], theta: &[f64]) -> f64 {
        let p = self.check_pair(theta_hat, theta);
        let mut total = 0.0;
        for j in 0..p {
            total += self.elementwise(j, theta_hat[j], theta[j]);
        }
        total / p as f64
    }

    fn elementwise(&self, j: usize, est: f64, truth: f64) -> f64 {
        match &self.kind {
            // The zero-one criterion is relative to the truth and therefore
            // already scale-free; the affine rescale is deliberately not
            // applied so the documented contract holds on the natural scale.
            LossKind::ZeroOne { tolerance } => {
                let hit = match &self.zero_fallback {
                    Some(f) if truth == 0.0 => est.abs() <= f[j],
                    _ => (est - truth).abs() <= tolerance * truth.abs(),
                };
                if hit {
                    0.0
                } else {
                    1.0
                }
            }
            LossKind::Absolute => self.scaled_diff(j, est, truth).0.abs(),
            LossKind::Squared => {
                let d = self.scaled_diff(j, est, truth).0;
                d * d
            }
            LossKind::Quantile { prob } => {
                let d = self.scaled_diff(j, est, truth).0;
                if d > 0.0 {
                    (1.0 - prob) * d
                } else {
                    -prob * d
                }
            }
        }
    }

    /// Gradient of [`LossSpec::value`] with respect to the estimate.
    ///
    /// Panics on the zero-one loss; callers must check
    /// [`LossSpec::differentiable`] first.
    pub fn grad_into(&self, theta_hat: &[f64], theta: &[f64], out: &mut [f64]) {
        let p = self.check_pair(theta_hat, theta);
        assert_eq!(out.len(), p, "gradient buffer length mismatch");
        assert!(
            self.differentiable(),
            "the zero-one loss has no gradient; check differentiable() first"
        );
        let pinv = 1.0 / p as f64;
        for j in 0..p {
            let (d, scale) = self.scaled_diff(j, theta_hat[j], theta[j]);
            let g = match &self.kind {
                LossKind::Absolute => {
                    if d > 0.0 {
                        1.0
                    } else if d < 0.0 {
                        -1.0
                    } else {
                        0.0
                    }
                }
                LossKind::Squared => 2.0 * d,
                LossKind::Quantile { prob } => {
                    if d > 0.0 {
                        1.0 - prob
                    } else if d < 0.0 {
                        -prob
                    } else {
                        0.0
                    }
                }
                LossKind::ZeroOne { .. } => unreachable!("checked above"),
            };
            out[j] = g * scale * pinv;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::RngStream;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    #[test]
    fn absolute_error_of_half() {
        assert_close(LossSpec::absolute().value(&[1.5], &[1.0]), 0.5, 0.0);
    }

    #[test]
    fn zero_one_accepts_within_relative_tolerance() {
        let spec = LossSpec::zero_one_default();
        assert_eq!(spec.value(&[1.05], &[1.0]), 0.0);
        assert_eq!(spec.value(&[1.2], &[1.0]), 1.0);
        // The boundary counts as a hit; 3 is exactly 50% above 2.
        let wide = LossSpec::zero_one(0.5).unwrap();
        assert_eq!(wide.value(&[3.0], &[2.0]), 0.0);
    }

    #[test]
    fn median_quantile_is_half_the_absolute_loss() {
        let spec = LossSpec::quantile(0.5).unwrap();
        let abs = LossSpec::absolute();
        let mut rng = RngStream::new(7, 0);
        for _ in 0..100 {
            let est = [rng.uniform(-5.0, 5.0), rng.uniform(-5.0, 5.0)];
            let truth = [rng.uniform(-5.0, 5.0), rng.uniform(-5.0, 5.0)];
            assert_close(spec.value(&est, &truth), 0.5 * abs.value(&est, &truth), 1e-15);
        }
    }

    #[test]
    fn quantile_tilts_over_and_under_estimation() {
        let spec = LossSpec::quantile(0.25).unwrap();
        // Overestimate by 1: weight 1 - prob.
        assert_close(spec.value(&[2.0], &[1.0]), 0.75, 1e-15);
        // Underestimate by 1: weight prob.
        assert_close(spec.value(&[0.0], &[1.0]), 0.25, 1e-15);
    }

    #[test]
    fn reduction_is_the_mean_over_parameters() {
        let spec = LossSpec::absolute();
        assert_close(spec.value(&[1.5, 3.5], &[1.0, 2.0]), 1.0, 1e-15);
    }

    #[test]
    fn scaling_divides_each_parameter_by_its_range() {
        let spec = LossSpec::absolute()
            .with_scaling(vec![
                AffineScale::from_bounds(0.0, 10.0).unwrap(),
                AffineScale::from_bounds(0.0, 2.0).unwrap(),
            ])
            .unwrap();
        // Raw differences 1 and 1 become 0.1 and 0.5.
        assert_close(spec.value(&[4.0, 1.5], &[3.0, 0.5]), 0.3, 1e-15);
    }

    #[test]
    fn zero_one_ignores_scaling() {
        let spec = LossSpec::zero_one_default()
            .with_scaling(vec![AffineScale::from_bounds(0.0, 100.0).unwrap()])
            .unwrap();
        assert_eq!(spec.value(&[1.05], &[1.0]), 0.0);
        assert_eq!(spec.value(&[1.2], &[1.0]), 1.0);
    }

    #[test]
    fn zero_truth_uses_the_absolute_fallback() {
        let plain = LossSpec::zero_one_default();
        // Without a fallback only an exact hit scores at a zero truth.
        assert_eq!(plain.value(&[0.0], &[0.0]), 0.0);
        assert_eq!(plain.value(&[1e-9], &[0.0]), 1.0);
        let spec = LossSpec::zero_one_default()
            .with_zero_fallback(vec![0.1])
            .unwrap();
        assert_eq!(spec.value(&[0.05], &[0.0]), 0.0);
        assert_eq!(spec.value(&[0.2], &[0.0]), 1.0);
        // Nonzero truths keep the relative criterion.
        assert_eq!(spec.value(&[1.05], &[1.0]), 0.0);
        assert_eq!(spec.value(&[1.2], &[1.0]), 1.0);
        assert!(LossSpec::absolute().with_zero_fallback(vec![0.1]).is_err());
        assert!(LossSpec::zero_one_default()
            .with_zero_fallback(vec![-0.1])
            .is_err());
    }

    #[test]
    fn gradients_match_finite_differences() {
        let specs = [
            LossSpec::absolute(),
            LossSpec::squared(),
            LossSpec::quantile(0.3).unwrap(),
            LossSpec::squared()
                .with_scaling(vec![
                    AffineScale::from_bounds(0.0, 4.0).unwrap(),
                    AffineScale::from_bounds(-1.0, 1.0).unwrap(),
                ])
                .unwrap(),
        ];
        let est = [2.3, -0.4];
        let truth = [1.0, 0.2];
        let h = 1e-6;
        for spec in &specs {
            let mut grad = [0.0; 2];
            spec.grad_into(&est, &truth, &mut grad);
            for j in 0..2 {
                let mut up = est;
                let mut dn = est;
                up[j] += h;
                dn[j] -= h;
                let fd = (spec.value(&up, &truth) - spec.value(&dn, &truth)) / (2.0 * h);
                assert_close(grad[j], fd, 1e-8);
            }
        }
    }

    #[test]
    fn zero_one_reports_no_gradient() {
        assert!(!LossSpec::zero_one_default().differentiable());
        assert!(LossSpec::absolute().differentiable());
    }

    #[test]
    #[should_panic(expected = "zero-one loss has no gradient")]
    fn zero_one_gradient_panics() {
        let mut out = [0.0];
        LossSpec::zero_one_default().grad_into(&[1.0], &[1.0], &mut out);
    }

    #[test]
    fn constructors_reject_bad_settings() {
        assert!(LossSpec::quantile(0.0).is_err());
        assert!(LossSpec::quantile(1.0).is_err());
        assert!(LossSpec::quantile(f64::NAN).is_err());
        assert!(LossSpec::zero_one(0.0).is_err());
        assert!(LossSpec::zero_one(-0.1).is_err());
        assert!(AffineScale::from_bounds(1.0, 1.0).is_err());
        assert!(AffineScale::from_bounds(0.0, f64::INFINITY).is_err());
        assert!(LossSpec::absolute().with_scaling(vec![]).is_err());
        assert!(LossSpec::absolute()
            .with_scaling(vec![AffineScale {
                offset: 0.0,
                scale: -1.0
            }])
            .is_err());
    }
}
