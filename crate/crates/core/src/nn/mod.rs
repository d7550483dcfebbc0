//! Small feed-forward networks with hand-written backpropagation.
//!
//! Everything is `f64`. Weights are stored row-major with shape
//! `(out_dim, in_dim)`; batched buffers are row-major with one sample per row.

mod optim;
pub mod gradcheck;

pub use optim::{optimizer_step, OptimizerMode, OptimizerState};

use rand::Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    /// Logistic sigmoid, codomain `(0, 1)`.
    Sigmoid,
    /// Hyperbolic tangent, codomain `(-1, 1)`.
    Tanh,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
            Activation::Tanh => z.tanh(),
            Activation::Identity => z,
        }
    }

    /// Derivative expressed through the post-activation value `a`.
    #[inline]
    pub fn derivative_from_output(self, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => a * (1.0 - a),
            Activation::Tanh => 1.0 - a * a,
            Activation::Identity => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Sigmoid => "sigmoid",
            Activation::Tanh => "tanh",
            Activation::Identity => "identity",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "relu" => Some(Activation::Relu),
            "sigmoid" => Some(Activation::Sigmoid),
            "tanh" => Some(Activation::Tanh),
            "identity" => Some(Activation::Identity),
            _ => None,
        }
    }
}

/// A dense affine layer. The activation lives on the [`Mlp`].
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl Layer {
    pub fn new(in_dim: usize, out_dim: usize, weights: Vec<f64>, biases: Vec<f64>) -> Result<Self> {
        if weights.len() != in_dim * out_dim {
            return Err(Error::Shape {
                context: "layer weights",
                expected: in_dim * out_dim,
                actual: weights.len(),
            });
        }
        if biases.len() != out_dim {
            return Err(Error::Shape {
                context: "layer biases",
                expected: out_dim,
                actual: biases.len(),
            });
        }
        Ok(Self {
            in_dim,
            out_dim,
            weights,
            biases,
        })
    }

    fn random<R: Rng + ?Sized>(in_dim: usize, out_dim: usize, rng: &mut R) -> Self {
        let limit = 1.0 / (in_dim as f64).sqrt();
        let weights = (0..in_dim * out_dim)
            .map(|_| rng.random_range(-limit..=limit))
            .collect();
        let biases = (0..out_dim)
            .map(|_| rng.random_range(-limit..=limit))
            .collect();
        Self {
            in_dim,
            out_dim,
            weights,
            biases,
        }
    }

    #[inline]
    fn row(&self, o: usize) -> &[f64] {
        &self.weights[o * self.in_dim..(o + 1) * self.in_dim]
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Multilayer perceptron: rectifier on hidden layers, a configurable output activation.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<Layer>,
    hidden_activation: Activation,
    output_activation: Activation,
}

/// Per-layer parameter gradients, shaped exactly like the network.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(net: &Mlp) -> Self {
        Self {
            weights: net.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            biases: net.layers.iter().map(|l| vec![0.0; l.biases.len()]).collect(),
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for v in self.weights.iter_mut().chain(self.biases.iter_mut()) {
            v.iter_mut().for_each(|g| *g *= factor);
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.weights
            .iter()
            .zip(&self.biases)
            .flat_map(|(w, b)| w.iter().chain(b.iter()).copied())
    }

    pub fn max_abs(&self) -> f64 {
        self.iter().fold(0.0, |m, g| m.max(g.abs()))
    }
}

/// Activations recorded by a batched forward pass, needed for backpropagation.
#[derive(Debug, Clone)]
pub struct Tape {
    batch: usize,
    /// `activations[0]` is the input, `activations[l + 1]` the output of layer `l`.
    activations: Vec<Vec<f64>>,
}

impl Tape {
    pub fn batch(&self) -> usize {
        self.batch
    }

    pub fn output(&self) -> &[f64] {
        self.activations.last().expect("tape has at least the input")
    }
}

impl Mlp {
    /// Randomly initialised network, weights and biases uniform in `±1/sqrt(fan_in)`.
    pub fn new<R: Rng + ?Sized>(
        layer_sizes: &[usize],
        hidden_activation: Activation,
        output_activation: Activation,
        rng: &mut R,
    ) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return Err(Error::Config(
                "an mlp needs at least an input and an output size".into(),
            ));
        }
        if layer_sizes.contains(&0) {
            return Err(Error::Config("layer sizes must be positive".into()));
        }
        let layers = layer_sizes
            .windows(2)
            .map(|w| Layer::random(w[0], w[1], rng))
            .collect();
        Ok(Self {
            layers,
            hidden_activation,
            output_activation,
        })
    }

    pub fn from_layers(
        layers: Vec<Layer>,
        hidden_activation: Activation,
        output_activation: Activation,
    ) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Config("an mlp needs at least one layer".into()));
        }
        for pair in layers.windows(2) {
            if pair[0].out_dim != pair[1].in_dim {
                return Err(Error::Shape {
                    context: "adjacent layer sizes",
                    expected: pair[0].out_dim,
                    actual: pair[1].in_dim,
                });
            }
        }
        Ok(Self {
            layers,
            hidden_activation,
            output_activation,
        })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn hidden_activation(&self) -> Activation {
        self.hidden_activation
    }

    pub fn output_activation(&self) -> Activation {
        self.output_activation
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        std::iter::once(self.input_dim())
            .chain(self.layers.iter().map(|l| l.out_dim))
            .collect()
    }

    pub fn num_parameters(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.biases.len())
            .sum()
    }

    pub fn same_architecture(&self, other: &Mlp) -> bool {
        self.layer_sizes() == other.layer_sizes()
            && self.hidden_activation == other.hidden_activation
            && self.output_activation == other.output_activation
    }

    pub fn parameters(&self) -> impl Iterator<Item = f64> + '_ {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(l.biases.iter()).copied())
    }

    pub fn parameters_mut(&mut self) -> impl Iterator<Item = &mut f64> + '_ {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weights.iter_mut().chain(l.biases.iter_mut()))
    }

    pub fn is_finite(&self) -> bool {
        self.parameters().all(f64::is_finite)
    }

    fn activation_of(&self, layer: usize) -> Activation {
        if layer + 1 == self.layers.len() {
            self.output_activation
        } else {
            self.hidden_activation
        }
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        let tape = self.forward_batch(input, 1)?;
        Ok(tape.activations.into_iter().last().unwrap_or_default())
    }

    /// Forward pass over `batch` samples stored row-major in `inputs`.
    pub fn forward_batch(&self, inputs: &[f64], batch: usize) -> Result<Tape> {
        let in_dim = self.input_dim();
        if inputs.len() != in_dim * batch {
            return Err(Error::Shape {
                context: "mlp input",
                expected: in_dim * batch,
                actual: inputs.len(),
            });
        }
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(inputs.to_vec());
        for (l, layer) in self.layers.iter().enumerate() {
            let act = self.activation_of(l);
            let x = &activations[l];
            let mut out = vec![0.0; layer.out_dim * batch];
            for b in 0..batch {
                let xb = &x[b * layer.in_dim..(b + 1) * layer.in_dim];
                let ob = &mut out[b * layer.out_dim..(b + 1) * layer.out_dim];
                for (o, y) in ob.iter_mut().enumerate() {
                    *y = act.apply(layer.biases[o] + dot(layer.row(o), xb));
                }
            }
            activations.push(out);
        }
        Ok(Tape { batch, activations })
    }

    /// Backpropagates `upstream` (dL/d output, row-major per sample) through the
    /// recorded tape. Returns parameter gradients summed over the batch and the
    /// per-sample input gradients.
    pub fn backward(&self, tape: &Tape, upstream: &[f64]) -> Result<(Gradients, Vec<f64>)> {
        let mut grads = Gradients::zeros_like(self);
        let input_grads = self.backward_into(tape, upstream, &mut grads)?;
        Ok((grads, input_grads))
    }

    /// Like [`Mlp::backward`] but accumulates into existing gradients.
    pub fn backward_into(
        &self,
        tape: &Tape,
        upstream: &[f64],
        grads: &mut Gradients,
    ) -> Result<Vec<f64>> {
        self.backprop(tape, upstream, Some(grads))
    }

    /// Per-sample input gradients only; parameter gradients are not formed.
    pub fn input_gradient(&self, tape: &Tape, upstream: &[f64]) -> Result<Vec<f64>> {
        self.backprop(tape, upstream, None)
    }

    fn backprop(
        &self,
        tape: &Tape,
        upstream: &[f64],
        mut grads: Option<&mut Gradients>,
    ) -> Result<Vec<f64>> {
        let batch = tape.batch;
        if tape.activations.len() != self.layers.len() + 1 {
            return Err(Error::Shape {
                context: "tape depth",
                expected: self.layers.len() + 1,
                actual: tape.activations.len(),
            });
        }
        if upstream.len() != self.output_dim() * batch {
            return Err(Error::Shape {
                context: "upstream gradient",
                expected: self.output_dim() * batch,
                actual: upstream.len(),
            });
        }
        if let Some(g) = grads.as_deref() {
            if g.weights.len() != self.layers.len() {
                return Err(Error::Shape {
                    context: "gradient layers",
                    expected: self.layers.len(),
                    actual: g.weights.len(),
                });
            }
        }

        let mut delta = upstream.to_vec();
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let act = self.activation_of(l);
            let out = &tape.activations[l + 1];
            let x = &tape.activations[l];
            for (d, &a) in delta.iter_mut().zip(out) {
                *d *= act.derivative_from_output(a);
            }
            if let Some(grads) = grads.as_deref_mut() {
                let gw = &mut grads.weights[l];
                let gb = &mut grads.biases[l];
                for b in 0..batch {
                    let xb = &x[b * layer.in_dim..(b + 1) * layer.in_dim];
                    let db = &delta[b * layer.out_dim..(b + 1) * layer.out_dim];
                    for (o, &g) in db.iter().enumerate() {
                        if g != 0.0 {
                            gb[o] += g;
                            axpy(g, xb, &mut gw[o * layer.in_dim..(o + 1) * layer.in_dim]);
                        }
                    }
                }
            }
            let mut prev = vec![0.0; layer.in_dim * batch];
            for b in 0..batch {
                let db = &delta[b * layer.out_dim..(b + 1) * layer.out_dim];
                let pb = &mut prev[b * layer.in_dim..(b + 1) * layer.in_dim];
                for (o, &g) in db.iter().enumerate() {
                    if g != 0.0 {
                        axpy(g, layer.row(o), pb);
                    }
                }
            }
            delta = prev;
        }
        Ok(delta)
    }
}

/// Moves every target parameter to `(1 - tau) * target + tau * online`.
pub fn soft_update(target: &mut Mlp, online: &Mlp, tau: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::Config(format!("tau must lie in [0, 1], got {tau}")));
    }
    if !target.same_architecture(online) {
        return Err(Error::Architecture(format!(
            "soft update between {:?} and {:?}",
            target.layer_sizes(),
            online.layer_sizes()
        )));
    }
    let keep = 1.0 - tau;
    for (t, o) in target.parameters_mut().zip(online.parameters()) {
        *t = keep * *t + tau * o;
    }
    Ok(())
}
