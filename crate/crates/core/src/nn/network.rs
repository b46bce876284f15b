use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use super::Activation;
use crate::error::{Error, Result};
use crate::rng::rng_from;

/// Shape and nonlinearity of one dense layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub input_dim: usize,
    pub output_dim: usize,
    pub activation: Activation,
}

impl LayerSpec {
    pub fn new(input_dim: usize, output_dim: usize, activation: Activation) -> Self {
        Self {
            input_dim,
            output_dim,
            activation,
        }
    }

    /// Builds a dimension-chained spec list `input -> widths[0] -> ... -> output`.
    /// Hidden layers use `hidden`, the final layer uses `output`.
    pub fn chain(
        input_dim: usize,
        hidden_widths: &[usize],
        output_dim: usize,
        hidden: Activation,
        output: Activation,
    ) -> Vec<LayerSpec> {
        let mut specs = Vec::with_capacity(hidden_widths.len() + 1);
        let mut prev = input_dim;
        for &w in hidden_widths {
            specs.push(LayerSpec::new(prev, w, hidden));
            prev = w;
        }
        specs.push(LayerSpec::new(prev, output_dim, output));
        specs
    }
}

/// One affine layer `y = f(x Wᵀ + b)` with `W` stored as `output_dim × input_dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    spec: LayerSpec,
    weights: Array2<f64>,
    bias: Array1<f64>,
}

impl DenseLayer {
    pub fn new(spec: LayerSpec, weights: Array2<f64>, bias: Array1<f64>) -> Result<Self> {
        if spec.input_dim == 0 || spec.output_dim == 0 {
            return Err(Error::Config("layer dimensions must be positive".into()));
        }
        let want = (spec.output_dim, spec.input_dim);
        if weights.dim() != want {
            return Err(Error::shape(
                "layer weights",
                format!("{want:?}"),
                format!("{:?}", weights.dim()),
            ));
        }
        if bias.len() != spec.output_dim {
            return Err(Error::shape("layer bias", spec.output_dim, bias.len()));
        }
        Ok(Self {
            spec,
            weights,
            bias,
        })
    }

    pub fn spec(&self) -> LayerSpec {
        self.spec
    }

    pub fn weights(&self) -> &Array2<f64> {
        &self.weights
    }

    pub fn bias(&self) -> &Array1<f64> {
        &self.bias
    }

    /// Direct parameter access, for tests and hand-built networks. Optimizer
    /// updates go through [`crate::optim`], which enforces the freeze contract.
    pub fn weights_mut(&mut self) -> &mut Array2<f64> {
        &mut self.weights
    }

    pub fn bias_mut(&mut self) -> &mut Array1<f64> {
        &mut self.bias
    }

    fn forward(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let mut z = x.dot(&self.weights.t());
        z += &self.bias;
        self.spec.activation.apply_inplace(&mut z);
        z
    }
}

/// Gradients for one layer, shaped like its parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGradient {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

/// Per-layer gradients mirroring a [`DenseNetwork`].
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet {
    pub layers: Vec<LayerGradient>,
}

impl GradientSet {
    pub fn zeros_like(net: &DenseNetwork) -> Self {
        let layers = net
            .layers
            .iter()
            .map(|l| LayerGradient {
                weights: Array2::zeros(l.weights.raw_dim()),
                bias: Array1::zeros(l.bias.raw_dim()),
            })
            .collect();
        Self { layers }
    }

    pub fn is_congruent(&self, net: &DenseNetwork) -> bool {
        self.layers.len() == net.layers.len()
            && self
                .layers
                .iter()
                .zip(&net.layers)
                .all(|(g, l)| g.weights.dim() == l.weights.dim() && g.bias.len() == l.bias.len())
    }

    /// `self += scale * other`.
    pub fn scaled_add(&mut self, scale: f64, other: &GradientSet) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weights.scaled_add(scale, &b.weights);
            a.bias.scaled_add(scale, &b.bias);
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for g in &mut self.layers {
            g.weights *= factor;
            g.bias *= factor;
        }
    }

    /// All entries in layer order, weights (row-major) then bias.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for g in &self.layers {
            out.extend(g.weights.iter().copied());
            out.extend(g.bias.iter().copied());
        }
        out
    }

    pub fn all_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|g| g.weights.iter().chain(g.bias.iter()).all(|v| v.is_finite()))
    }
}

/// Activations cached by [`DenseNetwork::forward`]: the input followed by
/// each layer's post-activation output.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    activations: Vec<Array2<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &Array2<f64> {
        self.activations
            .last()
            .expect("cache holds at least the input")
    }

    pub fn into_output(mut self) -> Array2<f64> {
        self.activations
            .pop()
            .expect("cache holds at least the input")
    }

    pub fn activations(&self) -> &[Array2<f64>] {
        &self.activations
    }
}

/// A feed-forward stack of dense layers.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseNetwork {
    layers: Vec<DenseLayer>,
    frozen: bool,
}

fn check_chain(specs: &[LayerSpec]) -> Result<()> {
    if specs.is_empty() {
        return Err(Error::Config("a network needs at least one layer".into()));
    }
    for s in specs {
        if s.input_dim == 0 || s.output_dim == 0 {
            return Err(Error::Config("layer dimensions must be positive".into()));
        }
    }
    for pair in specs.windows(2) {
        if pair[0].output_dim != pair[1].input_dim {
            return Err(Error::shape(
                "layer chain",
                pair[0].output_dim,
                pair[1].input_dim,
            ));
        }
    }
    Ok(())
}

impl DenseNetwork {
    /// Glorot-uniform weights, zero biases, deterministic in `seed`.
    pub fn init(specs: &[LayerSpec], seed: u64) -> Result<Self> {
        check_chain(specs)?;
        let mut rng = rng_from(seed);
        let layers = specs
            .iter()
            .map(|&spec| {
                let limit = (6.0 / (spec.input_dim + spec.output_dim) as f64).sqrt();
                let dist = Uniform::new_inclusive(-limit, limit).expect("finite positive limit");
                let weights =
                    Array2::from_shape_simple_fn((spec.output_dim, spec.input_dim), || {
                        dist.sample(&mut rng)
                    });
                DenseLayer {
                    spec,
                    weights,
                    bias: Array1::zeros(spec.output_dim),
                }
            })
            .collect();
        Ok(Self {
            layers,
            frozen: false,
        })
    }

    pub fn from_layers(layers: Vec<DenseLayer>) -> Result<Self> {
        let specs: Vec<LayerSpec> = layers.iter().map(|l| l.spec).collect();
        check_chain(&specs)?;
        Ok(Self {
            layers,
            frozen: false,
        })
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [DenseLayer] {
        &mut self.layers
    }

    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(|l| l.spec).collect()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].spec.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].spec.output_dim
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    pub fn freeze(&mut self) {
        self.frozen = true;
    }

    pub(crate) fn set_frozen(&mut self, frozen: bool) {
        self.frozen = frozen;
    }

    fn check_input(&self, x: &ArrayView2<f64>) -> Result<()> {
        if x.ncols() != self.input_dim() {
            return Err(Error::shape("network input", self.input_dim(), x.ncols()));
        }
        Ok(())
    }

    /// Forward pass keeping every intermediate activation for [`Self::backward`].
    pub fn forward(&self, x: ArrayView2<f64>) -> Result<ForwardCache> {
        self.check_input(&x)?;
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(x.to_owned());
        for layer in &self.layers {
            let next = layer.forward(activations.last().unwrap().view());
            activations.push(next);
        }
        Ok(ForwardCache { activations })
    }

    /// Forward pass without caching.
    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_input(&x)?;
        let mut out = self.layers[0].forward(x);
        for layer in &self.layers[1..] {
            out = layer.forward(out.view());
        }
        Ok(out)
    }

    /// Reverse-mode pass. `output_grad` is the gradient of a scalar loss with
    /// respect to the network output; returns parameter gradients and the
    /// gradient with respect to the network input.
    pub fn backward(
        &self,
        cache: &ForwardCache,
        output_grad: ArrayView2<f64>,
    ) -> Result<(GradientSet, Array2<f64>)> {
        let (grads, input_grad) = self.backward_impl(cache, output_grad, true)?;
        Ok((grads, input_grad.expect("requested")))
    }

    /// Like [`Self::backward`] but skips the input gradient.
    pub fn param_gradients(
        &self,
        cache: &ForwardCache,
        output_grad: ArrayView2<f64>,
    ) -> Result<GradientSet> {
        Ok(self.backward_impl(cache, output_grad, false)?.0)
    }

    fn backward_impl(
        &self,
        cache: &ForwardCache,
        output_grad: ArrayView2<f64>,
        want_input_grad: bool,
    ) -> Result<(GradientSet, Option<Array2<f64>>)> {
        if cache.activations.len() != self.layers.len() + 1 {
            return Err(Error::shape(
                "forward cache depth",
                self.layers.len() + 1,
                cache.activations.len(),
            ));
        }
        for (layer, act) in self.layers.iter().zip(&cache.activations[1..]) {
            if act.ncols() != layer.spec.output_dim {
                return Err(Error::shape(
                    "forward cache width",
                    layer.spec.output_dim,
                    act.ncols(),
                ));
            }
        }
        let out = cache.output();
        if output_grad.dim() != out.dim() {
            return Err(Error::shape(
                "output gradient",
                format!("{:?}", out.dim()),
                format!("{:?}", output_grad.dim()),
            ));
        }

        let mut grads = Vec::with_capacity(self.layers.len());
        let mut upstream = Some(output_grad.to_owned());
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let input = &cache.activations[i];
            let output = &cache.activations[i + 1];
            let g = upstream.take().expect("set by the previous layer");
            let delta = layer.spec.activation.backprop(output.view(), g.view());
            let weights = delta.t().dot(input);
            let bias = delta.sum_axis(Axis(0));
            if i > 0 || want_input_grad {
                upstream = Some(delta.dot(&layer.weights));
            }
            grads.push(LayerGradient { weights, bias });
        }
        grads.reverse();
        Ok((GradientSet { layers: grads }, upstream))
    }
}
