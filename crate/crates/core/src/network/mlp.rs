//! Dense layers and feed-forward chains.

use serde::{Deserialize, Serialize};

use crate::network::NetworkError;
use crate::numerics::{dot, RngStream};

/// Elementwise nonlinearity applied after the affine map of a layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Identity => x,
        }
    }

    /// Slope recovered from the post-activation value.  A relu output is
    /// positive exactly where the unit is active, so the pre-activation
    /// does not need to be stored for the reverse pass.
    #[inline]
    pub(crate) fn slope_at_output(self, post: f64) -> f64 {
        match self {
            Activation::Relu => {
                if post > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

/// One affine map plus activation.  Weights are stored row-major, one row
/// of length `in_dim` per output unit.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseLayer {
    in_dim: usize,
    out_dim: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
    activation: Activation,
}

impl DenseLayer {
    pub fn new(
        in_dim: usize,
        out_dim: usize,
        weights: Vec<f64>,
        bias: Vec<f64>,
        activation: Activation,
    ) -> Result<DenseLayer, NetworkError> {
        if in_dim == 0 || out_dim == 0 {
            return Err(NetworkError::Architecture(
                "layer dimensions must be positive".into(),
            ));
        }
        if weights.len() != in_dim * out_dim || bias.len() != out_dim {
            return Err(NetworkError::Architecture(format!(
                "layer {in_dim}->{out_dim} needs {} weights and {out_dim} biases, got {} and {}",
                in_dim * out_dim,
                weights.len(),
                bias.len()
            )));
        }
        if !weights.iter().chain(bias.iter()).all(|v| v.is_finite()) {
            return Err(NetworkError::Architecture(
                "layer parameters must be finite".into(),
            ));
        }
        Ok(DenseLayer {
            in_dim,
            out_dim,
            weights,
            bias,
            activation,
        })
    }

    /// Weights uniform on `±sqrt(6 / in_dim)`, biases zero.
    pub fn init(
        in_dim: usize,
        out_dim: usize,
        activation: Activation,
        rng: &mut RngStream,
    ) -> Result<DenseLayer, NetworkError> {
        if in_dim == 0 {
            return Err(NetworkError::Architecture(
                "layer dimensions must be positive".into(),
            ));
        }
        let bound = (6.0 / in_dim as f64).sqrt();
        let weights = (0..in_dim * out_dim)
            .map(|_| rng.uniform(-bound, bound))
            .collect();
        DenseLayer::new(in_dim, out_dim, weights, vec![0.0; out_dim], activation)
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub(crate) fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub(crate) fn bias_mut(&mut self) -> &mut [f64] {
        &mut self.bias
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    pub(crate) fn forward_into(&self, input: &[f64], out: &mut [f64]) {
        debug_assert_eq!(input.len(), self.in_dim);
        debug_assert_eq!(out.len(), self.out_dim);
        for (o, slot) in out.iter_mut().enumerate() {
            let row = &self.weights[o * self.in_dim..][..self.in_dim];
            *slot = self.activation.apply(dot(row, input) + self.bias[o]);
        }
    }

    /// Reverse step for one layer.  `delta` enters holding the loss gradient
    /// with respect to the post-activation output and is overwritten with the
    /// pre-activation gradient; weight and bias gradients accumulate into
    /// `grad_w` and `grad_b`; when `delta_in` is given it receives the
    /// gradient with respect to the layer input.
    pub(crate) fn backward(
        &self,
        input: &[f64],
        post: &[f64],
        delta: &mut [f64],
        delta_in: Option<&mut [f64]>,
        grad_w: &mut [f64],
        grad_b: &mut [f64],
    ) {
        debug_assert_eq!(input.len(), self.in_dim);
        debug_assert_eq!(post.len(), self.out_dim);
        debug_assert_eq!(delta.len(), self.out_dim);
        debug_assert_eq!(grad_w.len(), self.weights.len());
        debug_assert_eq!(grad_b.len(), self.bias.len());
        for o in 0..self.out_dim {
            delta[o] *= self.activation.slope_at_output(post[o]);
        }
        for o in 0..self.out_dim {
            let dp = delta[o];
            if dp == 0.0 {
                continue;
            }
            grad_b[o] += dp;
            let row = &mut grad_w[o * self.in_dim..][..self.in_dim];
            for (slot, x) in row.iter_mut().zip(input) {
                *slot += dp * x;
            }
        }
        if let Some(delta_in) = delta_in {
            let delta_in = &mut delta_in[..self.in_dim];
            delta_in.fill(0.0);
            for o in 0..self.out_dim {
                let dp = delta[o];
                if dp == 0.0 {
                    continue;
                }
                let row = &self.weights[o * self.in_dim..][..self.in_dim];
                for (slot, w) in delta_in.iter_mut().zip(row) {
                    *slot += dp * w;
                }
            }
        }
    }
}

/// A chain of dense layers with matching dimensions.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    layers: Vec<DenseLayer>,
}

impl Mlp {
    pub fn new(layers: Vec<DenseLayer>) -> Result<Mlp, NetworkError> {
        if layers.is_empty() {
            return Err(NetworkError::Architecture(
                "a network needs at least one layer".into(),
            ));
        }
        for (l, pair) in layers.windows(2).enumerate() {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(NetworkError::Architecture(format!(
                    "layer {l} emits {} values but layer {} expects {}",
                    pair[0].out_dim(),
                    l + 1,
                    pair[1].in_dim()
                )));
            }
        }
        Ok(Mlp { layers })
    }

    /// Random network over the dimension chain `dims`; hidden layers use
    /// relu, the final layer uses `output`.
    pub fn init(
        dims: &[usize],
        output: Activation,
        rng: &mut RngStream,
    ) -> Result<Mlp, NetworkError> {
        if dims.len() < 2 {
            return Err(NetworkError::Architecture(
                "a network needs an input and an output dimension".into(),
            ));
        }
        let last = dims.len() - 2;
        let mut layers = Vec::with_capacity(dims.len() - 1);
        for (l, pair) in dims.windows(2).enumerate() {
            let act = if l == last { output } else { Activation::Relu };
            layers.push(DenseLayer::init(pair[0], pair[1], act, rng)?);
        }
        Mlp::new(layers)
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    pub fn output_activation(&self) -> Activation {
        self.layers[self.layers.len() - 1].activation()
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [DenseLayer] {
        &mut self.layers
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(DenseLayer::param_count).sum()
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>, NetworkError> {
        if x.len() != self.input_dim() {
            return Err(NetworkError::Dimension(format!(
                "input has {} values, network expects {}",
                x.len(),
                self.input_dim()
            )));
        }
        let mut cur = x.to_vec();
        let mut next = Vec::new();
        for layer in &self.layers {
            next.resize(layer.out_dim(), 0.0);
            layer.forward_into(&cur, &mut next);
            std::mem::swap(&mut cur, &mut next);
        }
        Ok(cur)
    }
}
