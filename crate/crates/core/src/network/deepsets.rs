//! The set estimator: encode replicates, average, decode.

use serde::{Deserialize, Serialize};

use crate::models::ReplicateSet;
use crate::network::{Activation, Mlp, NetworkError};
use crate::numerics::RngStream;
use crate::training::LossSpec;

/// User-defined summary statistics appended to the learned set summary
/// before decoding.  Every statistic must be replicate-order invariant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExpertStats {
    None,
    /// Sample quantiles of each data dimension across replicates, linearly
    /// interpolated between order statistics.
    Quantiles { probs: Vec<f64> },
}

impl ExpertStats {
    pub fn quantiles(probs: Vec<f64>) -> Result<ExpertStats, NetworkError> {
        let spec = ExpertStats::Quantiles { probs };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), NetworkError> {
        if let ExpertStats::Quantiles { probs } = self {
            if probs.is_empty() {
                return Err(NetworkError::Architecture(
                    "quantile statistics need at least one probability".into(),
                ));
            }
            if !probs.iter().all(|p| p.is_finite() && (0.0..=1.0).contains(p)) {
                return Err(NetworkError::Architecture(
                    "quantile probabilities must lie in [0, 1]".into(),
                ));
            }
        }
        Ok(())
    }

    /// Statistic count for data dimension `n`.
    pub fn output_len(&self, n: usize) -> usize {
        match self {
            ExpertStats::None => 0,
            ExpertStats::Quantiles { probs } => n * probs.len(),
        }
    }

    pub fn compute(&self, rs: &ReplicateSet) -> Vec<f64> {
        let mut out = vec![0.0; self.output_len(rs.n())];
        let mut sort_buf = Vec::new();
        self.compute_into(rs.data(), rs.n(), rs.m(), &mut sort_buf, &mut out);
        out
    }

    // Layout: all probabilities for dimension 0, then dimension 1, ...
    pub(crate) fn compute_into(
        &self,
        data: &[f64],
        n: usize,
        m: usize,
        sort_buf: &mut Vec<f64>,
        out: &mut [f64],
    ) {
        let ExpertStats::Quantiles { probs } = self else {
            return;
        };
        for dim in 0..n {
            sort_buf.clear();
            sort_buf.extend((0..m).map(|j| data[j * n + dim]));
            sort_buf.sort_unstable_by(f64::total_cmp);
            for (k, &p) in probs.iter().enumerate() {
                out[dim * probs.len() + k] = interpolated_quantile(sort_buf, p);
            }
        }
    }
}

// Quantile as linear interpolation between adjacent order statistics at rank
// (m - 1) * p, the same convention the bootstrap intervals use.
fn interpolated_quantile(sorted: &[f64], p: f64) -> f64 {
    let m = sorted.len();
    let h = (m - 1) as f64 * p;
    let lo = h.floor() as usize;
    if lo >= m - 1 {
        return sorted[m - 1];
    }
    let frac = h - lo as f64;
    sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
}

/// Scratch buffers for forward and reverse passes.  Reusing one workspace
/// across calls keeps the training loop free of per-set allocation.
#[derive(Debug, Default)]
pub struct Workspace {
    // Post-activation values per inner layer, replicate-contiguous.
    psi_acts: Vec<Vec<f64>>,
    phi_acts: Vec<Vec<f64>>,
    // Decoder input: learned summary then expert statistics.
    u: Vec<f64>,
    theta_hat: Vec<f64>,
    delta_a: Vec<f64>,
    delta_b: Vec<f64>,
    // Gradient with respect to the pooled summary.
    dt: Vec<f64>,
    dloss: Vec<f64>,
    sort_buf: Vec<f64>,
}

impl Workspace {
    pub fn new() -> Workspace {
        Workspace::default()
    }
}

/// Gradient buffers shaped like an estimator's parameters.
#[derive(Clone, Debug)]
pub struct Gradients {
    pub(crate) psi: Vec<LayerGradient>,
    pub(crate) phi: Vec<LayerGradient>,
}

#[derive(Clone, Debug)]
pub(crate) struct LayerGradient {
    pub(crate) weights: Vec<f64>,
    pub(crate) bias: Vec<f64>,
}

impl Gradients {
    fn for_mlp(mlp: &Mlp) -> Vec<LayerGradient> {
        mlp.layers()
            .iter()
            .map(|l| LayerGradient {
                weights: vec![0.0; l.weights().len()],
                bias: vec![0.0; l.bias().len()],
            })
            .collect()
    }

    pub fn zero(&mut self) {
        for layer in self.psi.iter_mut().chain(self.phi.iter_mut()) {
            layer.weights.fill(0.0);
            layer.bias.fill(0.0);
        }
    }

    // Layer buffers in parameter order, inner network first.
    pub(crate) fn layers(&self) -> impl Iterator<Item = &LayerGradient> {
        self.psi.iter().chain(self.phi.iter())
    }

    pub fn param_count(&self) -> usize {
        self.psi
            .iter()
            .chain(self.phi.iter())
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    /// Flattened copy in parameter order: inner layers then outer layers,
    /// each layer's weights row-major then its biases.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut flat = Vec::with_capacity(self.param_count());
        for layer in self.psi.iter().chain(self.phi.iter()) {
            flat.extend_from_slice(&layer.weights);
            flat.extend_from_slice(&layer.bias);
        }
        flat
    }
}

/// Replicate-order invariant estimator: an inner network encodes each
/// replicate, the encodings are averaged, expert statistics are appended and
/// an outer network maps the summary to a parameter estimate.
#[derive(Clone, Debug, PartialEq)]
pub struct DeepSetsEstimator {
    psi: Mlp,
    phi: Mlp,
    expert: ExpertStats,
    clamp: Option<Vec<(f64, f64)>>,
}

impl DeepSetsEstimator {
    pub fn new(psi: Mlp, phi: Mlp, expert: ExpertStats) -> Result<DeepSetsEstimator, NetworkError> {
        expert.validate()?;
        let want = psi.output_dim() + expert.output_len(psi.input_dim());
        if phi.input_dim() != want {
            return Err(NetworkError::Architecture(format!(
                "outer network expects {} inputs but summary ({}) plus statistics ({}) give {want}",
                phi.input_dim(),
                psi.output_dim(),
                expert.output_len(psi.input_dim()),
            )));
        }
        if phi.output_activation() != Activation::Identity {
            return Err(NetworkError::Architecture(
                "outer network must end with an identity layer".into(),
            ));
        }
        Ok(DeepSetsEstimator {
            psi,
            phi,
            expert,
            clamp: None,
        })
    }

    /// Random estimator with the default architecture: inner network
    /// `n -> 128 -> 128 -> 64` all relu, outer network `. -> 128 -> p` with
    /// relu hidden and identity output.
    pub fn with_default_architecture(
        n: usize,
        p: usize,
        expert: ExpertStats,
        rng: &mut RngStream,
    ) -> Result<DeepSetsEstimator, NetworkError> {
        DeepSetsEstimator::with_architecture(n, p, 64, &[128, 128], &[128], expert, rng)
    }

    /// Random estimator over explicit hidden widths; `q` is the learned
    /// summary dimension.
    pub fn with_architecture(
        n: usize,
        p: usize,
        q: usize,
        psi_hidden: &[usize],
        phi_hidden: &[usize],
        expert: ExpertStats,
        rng: &mut RngStream,
    ) -> Result<DeepSetsEstimator, NetworkError> {
        expert.validate()?;
        let mut psi_dims = Vec::with_capacity(psi_hidden.len() + 2);
        psi_dims.push(n);
        psi_dims.extend_from_slice(psi_hidden);
        psi_dims.push(q);
        let psi = Mlp::init(&psi_dims, Activation::Relu, rng)?;
        let mut phi_dims = Vec::with_capacity(phi_hidden.len() + 2);
        phi_dims.push(q + expert.output_len(n));
        phi_dims.extend_from_slice(phi_hidden);
        phi_dims.push(p);
        let phi = Mlp::init(&phi_dims, Activation::Identity, rng)?;
        DeepSetsEstimator::new(psi, phi, expert)
    }

    /// Data dimension per replicate.
    pub fn n(&self) -> usize {
        self.psi.input_dim()
    }

    /// Parameter dimension.
    pub fn p(&self) -> usize {
        self.phi.output_dim()
    }

    /// Learned summary dimension.
    pub fn q(&self) -> usize {
        self.psi.output_dim()
    }

    pub fn psi(&self) -> &Mlp {
        &self.psi
    }

    pub fn phi(&self) -> &Mlp {
        &self.phi
    }

    pub fn expert(&self) -> &ExpertStats {
        &self.expert
    }

    pub fn clamp(&self) -> Option<&[(f64, f64)]> {
        self.clamp.as_deref()
    }

    /// Clamp estimates (not training forwards) to per-parameter bounds.
    /// Off by default so risk comparisons see the raw network output.
    pub fn set_clamp(&mut self, bounds: Vec<(f64, f64)>) -> Result<(), NetworkError> {
        if bounds.len() != self.p() {
            return Err(NetworkError::Dimension(format!(
                "{} clamp bounds for {} parameters",
                bounds.len(),
                self.p()
            )));
        }
        if !bounds.iter().all(|(lo, hi)| lo <= hi && !lo.is_nan() && !hi.is_nan()) {
            return Err(NetworkError::Architecture(
                "clamp bounds must satisfy lo <= hi".into(),
            ));
        }
        self.clamp = Some(bounds);
        Ok(())
    }

    pub fn clear_clamp(&mut self) {
        self.clamp = None;
    }

    pub fn param_count(&self) -> usize {
        self.psi.param_count() + self.phi.param_count()
    }

    /// Zeroed gradient buffers matching this estimator.
    pub fn zero_gradients(&self) -> Gradients {
        Gradients {
            psi: Gradients::for_mlp(&self.psi),
            phi: Gradients::for_mlp(&self.phi),
        }
    }

    /// Flattened parameter copy in the order gradients and checkpoints use.
    pub fn params_flat(&self) -> Vec<f64> {
        let mut flat = Vec::with_capacity(self.param_count());
        for layer in self.psi.layers().iter().chain(self.phi.layers()) {
            flat.extend_from_slice(layer.weights());
            flat.extend_from_slice(layer.bias());
        }
        flat
    }

    pub fn set_params_flat(&mut self, flat: &[f64]) -> Result<(), NetworkError> {
        if flat.len() != self.param_count() {
            return Err(NetworkError::Dimension(format!(
                "{} parameters supplied, estimator has {}",
                flat.len(),
                self.param_count()
            )));
        }
        if !flat.iter().all(|v| v.is_finite()) {
            return Err(NetworkError::Architecture(
                "parameters must be finite".into(),
            ));
        }
        let mut at = 0;
        for layer in self
            .psi
            .layers_mut()
            .iter_mut()
            .chain(self.phi.layers_mut())
        {
            let nw = layer.weights().len();
            layer.weights_mut().copy_from_slice(&flat[at..at + nw]);
            at += nw;
            let nb = layer.bias().len();
            layer.bias_mut().copy_from_slice(&flat[at..at + nb]);
            at += nb;
        }
        Ok(())
    }

    pub(crate) fn layers_mut(&mut self) -> impl Iterator<Item = &mut crate::network::DenseLayer> {
        self.psi
            .layers_mut()
            .iter_mut()
            .chain(self.phi.layers_mut())
    }

    pub fn estimate(&self, rs: &ReplicateSet) -> Result<Vec<f64>, NetworkError> {
        let mut ws = Workspace::new();
        self.estimate_with(rs, &mut ws)
    }

    pub fn estimate_with(
        &self,
        rs: &ReplicateSet,
        ws: &mut Workspace,
    ) -> Result<Vec<f64>, NetworkError> {
        if rs.n() != self.n() {
            return Err(NetworkError::Dimension(format!(
                "data has dimension {} per replicate, estimator expects {}",
                rs.n(),
                self.n()
            )));
        }
        self.forward_ws(rs.data(), rs.m(), ws);
        let mut out = ws.theta_hat.clone();
        if let Some(bounds) = &self.clamp {
            for (v, (lo, hi)) in out.iter_mut().zip(bounds) {
                *v = v.clamp(*lo, *hi);
            }
        }
        Ok(out)
    }

    // Forward pass storing every post-activation so a reverse pass can
    // follow.  The estimate lands in ws.theta_hat, unclamped.
    fn forward_ws(&self, data: &[f64], m: usize, ws: &mut Workspace) {
        let n = self.n();
        let q = self.q();
        debug_assert_eq!(data.len(), n * m);

        let psi_layers = self.psi.layers();
        if ws.psi_acts.len() != psi_layers.len() {
            ws.psi_acts = vec![Vec::new(); psi_layers.len()];
        }
        for (l, layer) in psi_layers.iter().enumerate() {
            ws.psi_acts[l].resize(m * layer.out_dim(), 0.0);
        }
        for j in 0..m {
            let x = &data[j * n..][..n];
            for (l, layer) in psi_layers.iter().enumerate() {
                let w = layer.out_dim();
                let (prev, rest) = ws.psi_acts.split_at_mut(l);
                let out = &mut rest[0][j * w..][..w];
                let input: &[f64] = if l == 0 {
                    x
                } else {
                    let wp = psi_layers[l - 1].out_dim();
                    &prev[l - 1][j * wp..][..wp]
                };
                layer.forward_into(input, out);
            }
        }

        let s_len = self.expert.output_len(n);
        ws.u.resize(q + s_len, 0.0);
        let summary = &mut ws.u[..q];
        summary.fill(0.0);
        let top = &ws.psi_acts[psi_layers.len() - 1];
        for j in 0..m {
            for (slot, v) in summary.iter_mut().zip(&top[j * q..][..q]) {
                *slot += v;
            }
        }
        let minv = 1.0 / m as f64;
        for slot in summary.iter_mut() {
            *slot *= minv;
        }
        self.expert
            .compute_into(data, n, m, &mut ws.sort_buf, &mut ws.u[q..]);

        let phi_layers = self.phi.layers();
        if ws.phi_acts.len() != phi_layers.len() {
            ws.phi_acts = vec![Vec::new(); phi_layers.len()];
        }
        for (l, layer) in phi_layers.iter().enumerate() {
            let (prev, rest) = ws.phi_acts.split_at_mut(l);
            let out = &mut rest[0];
            out.resize(layer.out_dim(), 0.0);
            let input: &[f64] = if l == 0 { &ws.u } else { &prev[l - 1] };
            layer.forward_into(input, out);
        }
        ws.theta_hat.clear();
        ws.theta_hat
            .extend_from_slice(&ws.phi_acts[phi_layers.len() - 1]);
    }

    /// Gradient of the batch-mean loss with respect to every weight and
    /// bias, written into `grads`; returns the batch-mean loss.  Each batch
    /// item is a true parameter vector with the data simulated from it.
    pub fn backward(
        &self,
        batch: &[(&[f64], &ReplicateSet)],
        loss: &LossSpec,
        ws: &mut Workspace,
        grads: &mut Gradients,
    ) -> Result<f64, NetworkError> {
        if batch.is_empty() {
            return Err(NetworkError::Dimension(
                "gradient of an empty batch".into(),
            ));
        }
        if !loss.differentiable() {
            return Err(NetworkError::Loss(
                "the zero-one loss has no gradient; train with the absolute, squared or quantile loss"
                    .into(),
            ));
        }
        let p = self.p();
        if let Some(d) = loss.scaling_dim() {
            if d != p {
                return Err(NetworkError::Dimension(format!(
                    "loss scaling covers {d} parameters, estimator has {p}"
                )));
            }
        }
        self.check_gradient_shapes(grads)?;
        grads.zero();

        let bscale = 1.0 / batch.len() as f64;
        let mut total = 0.0;
        for (k, &(theta, rs)) in batch.iter().enumerate() {
            if theta.len() != p {
                return Err(NetworkError::Dimension(format!(
                    "batch item {k}: parameter vector has length {}, estimator emits {p}",
                    theta.len()
                )));
            }
            if rs.n() != self.n() {
                return Err(NetworkError::Dimension(format!(
                    "batch item {k}: data dimension {} does not match estimator input {}",
                    rs.n(),
                    self.n()
                )));
            }
            self.forward_ws(rs.data(), rs.m(), ws);
            total += loss.value(&ws.theta_hat, theta);
            ws.dloss.resize(p, 0.0);
            loss.grad_into(&ws.theta_hat, theta, &mut ws.dloss);
            for g in ws.dloss.iter_mut() {
                *g *= bscale;
            }
            self.backward_ws(rs.data(), rs.m(), ws, grads);
        }
        Ok(total * bscale)
    }

    // Reverse pass for the set most recently run through forward_ws.
    // ws.dloss holds the seed gradient with respect to the estimate.
    fn backward_ws(&self, data: &[f64], m: usize, ws: &mut Workspace, grads: &mut Gradients) {
        let n = self.n();
        let q = self.q();

        let phi_layers = self.phi.layers();
        ws.delta_a.clear();
        ws.delta_a.extend_from_slice(&ws.dloss);
        for l in (0..phi_layers.len()).rev() {
            let layer = &phi_layers[l];
            let post = &ws.phi_acts[l][..];
            let input: &[f64] = if l == 0 { &ws.u } else { &ws.phi_acts[l - 1] };
            let g = &mut grads.phi[l];
            ws.delta_b.resize(layer.in_dim(), 0.0);
            layer.backward(
                input,
                post,
                &mut ws.delta_a,
                Some(&mut ws.delta_b),
                &mut g.weights,
                &mut g.bias,
            );
            std::mem::swap(&mut ws.delta_a, &mut ws.delta_b);
        }

        // Expert statistics carry no parameters, so only the learned part of
        // the decoder input propagates further.  Averaging hands each
        // replicate branch 1/m of the summary gradient.
        ws.dt.clear();
        ws.dt.extend_from_slice(&ws.delta_a[..q]);
        let minv = 1.0 / m as f64;

        let psi_layers = self.psi.layers();
        for j in 0..m {
            ws.delta_a.clear();
            ws.delta_a.extend(ws.dt.iter().map(|d| d * minv));
            for l in (0..psi_layers.len()).rev() {
                let layer = &psi_layers[l];
                let w = layer.out_dim();
                let post = &ws.psi_acts[l][j * w..][..w];
                let input: &[f64] = if l == 0 {
                    &data[j * n..][..n]
                } else {
                    let wp = psi_layers[l - 1].out_dim();
                    &ws.psi_acts[l - 1][j * wp..][..wp]
                };
                let g = &mut grads.psi[l];
                if l == 0 {
                    layer.backward(input, post, &mut ws.delta_a, None, &mut g.weights, &mut g.bias);
                } else {
                    ws.delta_b.resize(layer.in_dim(), 0.0);
                    layer.backward(
                        input,
                        post,
                        &mut ws.delta_a,
                        Some(&mut ws.delta_b),
                        &mut g.weights,
                        &mut g.bias,
                    );
                    std::mem::swap(&mut ws.delta_a, &mut ws.delta_b);
                }
            }
        }
    }

    fn check_gradient_shapes(&self, grads: &Gradients) -> Result<(), NetworkError> {
        let ok = grads.psi.len() == self.psi.layers().len()
            && grads.phi.len() == self.phi.layers().len()
            && self
                .psi
                .layers()
                .iter()
                .zip(&grads.psi)
                .chain(self.phi.layers().iter().zip(&grads.phi))
                .all(|(l, g)| {
                    g.weights.len() == l.weights().len() && g.bias.len() == l.bias().len()
                });
        if ok {
            Ok(())
        } else {
            Err(NetworkError::Dimension(
                "gradient buffers do not match the estimator's layers".into(),
            ))
        }
    }
}
