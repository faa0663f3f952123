//! Configurable MLP classifier with exact backpropagation.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_chacha::rand_core::SeedableRng;

use crate::error::{AmpError, Result};
use crate::nn::functions::{logsumexp, softmax};
use crate::tensor::Tensor2D;

/// Hidden-layer activation. Output layers are always linear (logits).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
}

impl Activation {
    pub fn name(&self) -> &'static str {
        match self {
            Activation::Relu => "relu",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Activation::Relu),
            other => Err(AmpError::InvalidArgument(format!(
                "unknown activation '{other}'"
            ))),
        }
    }
}

/// Feed-forward classifier. Weights are row-major `(in x out)`, so a batch
/// `(B x in)` forwards as `batch * W + b`. For anchored models the first
/// layer width is `2 * d` (anchor and residual concatenated).
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    layer_sizes: Vec<usize>,
    weights: Vec<Tensor2D>,
    biases: Vec<Tensor2D>,
    activation: Activation,
    init_seed: u64,
}

/// Per-parameter gradients, shape-matched to the model's weights and biases.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub weights: Vec<Tensor2D>,
    pub biases: Vec<Tensor2D>,
}

impl MlpModel {
    /// He-uniform fan-in initialization: each weight is drawn from
    /// `U(-sqrt(6/fan_in), sqrt(6/fan_in))`; biases start at zero. The same
    /// seed reproduces bit-identical parameters.
    pub fn new(layer_sizes: &[usize], activation: Activation, init_seed: u64) -> Result<Self> {
        validate_layer_sizes(layer_sizes)?;
        let mut rng = ChaCha8Rng::seed_from_u64(init_seed);
        let mut weights = Vec::with_capacity(layer_sizes.len() - 1);
        let mut biases = Vec::with_capacity(layer_sizes.len() - 1);
        for w in layer_sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let limit = (6.0 / fan_in as f64).sqrt();
            let data = (0..fan_in * fan_out)
                .map(|_| rng.random_range(-limit..limit))
                .collect();
            weights.push(Tensor2D::from_raw(fan_in, fan_out, data));
            biases.push(Tensor2D::zeros(1, fan_out));
        }
        Ok(Self {
            layer_sizes: layer_sizes.to_vec(),
            weights,
            biases,
            activation,
            init_seed,
        })
    }

    /// All-zero parameters; useful for tests and as a checkpoint shell.
    pub fn zeros(layer_sizes: &[usize], activation: Activation) -> Result<Self> {
        validate_layer_sizes(layer_sizes)?;
        let weights = layer_sizes
            .windows(2)
            .map(|w| Tensor2D::zeros(w[0], w[1]))
            .collect();
        let biases = layer_sizes
            .windows(2)
            .map(|w| Tensor2D::zeros(1, w[1]))
            .collect();
        Ok(Self {
            layer_sizes: layer_sizes.to_vec(),
            weights,
            biases,
            activation,
            init_seed: 0,
        })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn num_classes(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn init_seed(&self) -> u64 {
        self.init_seed
    }

    pub fn num_layers(&self) -> usize {
        self.weights.len()
    }

    pub fn weight(&self, layer: usize) -> &Tensor2D {
        &self.weights[layer]
    }

    pub fn bias(&self, layer: usize) -> &Tensor2D {
        &self.biases[layer]
    }

    pub(crate) fn params_mut(&mut self) -> (&mut Vec<Tensor2D>, &mut Vec<Tensor2D>) {
        (&mut self.weights, &mut self.biases)
    }

    /// Replace the parameters of an existing shell; shapes must match.
    pub(crate) fn set_params(&mut self, weights: Vec<Tensor2D>, biases: Vec<Tensor2D>) {
        debug_assert_eq!(weights.len(), self.weights.len());
        debug_assert_eq!(biases.len(), self.biases.len());
        self.weights = weights;
        self.biases = biases;
    }

    pub(crate) fn set_init_seed(&mut self, seed: u64) {
        self.init_seed = seed;
    }

    /// Forward pass to logits `(batch x num_classes)`. Deterministic for a
    /// fixed model and batch.
    pub fn forward(&self, batch: &Tensor2D) -> Result<Tensor2D> {
        self.check_input(batch)?;
        let mut act = batch.clone();
        let last = self.weights.len() - 1;
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let z = act.matmul(w)?.add_row_vector(b.data())?;
            act = if l < last { self.activate(&z) } else { z };
        }
        Ok(act)
    }

    /// Mean cross-entropy loss and exact gradients for every parameter.
    pub fn backward(&self, batch: &Tensor2D, labels: &[usize]) -> Result<(Gradients, f64)> {
        self.check_input(batch)?;
        let n = self.num_classes();
        if labels.len() != batch.rows() {
            return Err(AmpError::ShapeMismatch {
                context: "backward labels",
                expected: format!("{} labels", batch.rows()),
                actual: format!("{} labels", labels.len()),
            });
        }
        for &y in labels {
            if y >= n {
                return Err(AmpError::LabelOutOfRange {
                    label: y,
                    num_classes: n,
                });
            }
        }

        // Forward with cached activations (input counts as activation 0).
        let last = self.weights.len() - 1;
        let mut acts: Vec<Tensor2D> = Vec::with_capacity(self.weights.len() + 1);
        let mut pre: Vec<Tensor2D> = Vec::with_capacity(self.weights.len());
        acts.push(batch.clone());
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let z = acts[l].matmul(w)?.add_row_vector(b.data())?;
            let a = if l < last { self.activate(&z) } else { z.clone() };
            pre.push(z);
            acts.push(a);
        }
        let logits = &acts[acts.len() - 1];

        let batch_rows = batch.rows() as f64;
        let loss = labels
            .iter()
            .enumerate()
            .map(|(i, &y)| logsumexp(logits.row(i)) - logits.get(i, y))
            .sum::<f64>()
            / batch_rows;

        // dL/dlogits = (softmax - onehot) / B, then standard backprop.
        let mut delta = softmax(logits);
        for (i, &y) in labels.iter().enumerate() {
            let v = delta.get(i, y);
            delta.set(i, y, v - 1.0);
        }
        let delta = delta.scale(1.0 / batch_rows);

        let mut grad_w = vec![Tensor2D::zeros(0, 0); self.weights.len()];
        let mut grad_b = vec![Tensor2D::zeros(0, 0); self.weights.len()];
        let mut dz = delta;
        for l in (0..self.weights.len()).rev() {
            grad_w[l] = acts[l].tr_matmul(&dz)?;
            grad_b[l] = Tensor2D::from_raw(1, dz.cols(), dz.column_sums());
            if l > 0 {
                let da = dz.matmul_tr(&self.weights[l])?;
                dz = self.activate_grad(&pre[l - 1], &da);
            }
        }
        Ok((
            Gradients {
                weights: grad_w,
                biases: grad_b,
            },
            loss,
        ))
    }

    /// Argmax class per row of `forward(batch)`; ties go to the lower index.
    pub fn predict(&self, batch: &Tensor2D) -> Result<Vec<usize>> {
        let logits = self.forward(batch)?;
        Ok((0..logits.rows()).map(|i| argmax(logits.row(i))).collect())
    }

    fn activate(&self, z: &Tensor2D) -> Tensor2D {
        match self.activation {
            Activation::Relu => z.map(|v| v.max(0.0)),
        }
    }

    /// Chain `upstream` through the activation derivative at pre-activation `z`.
    fn activate_grad(&self, z: &Tensor2D, upstream: &Tensor2D) -> Tensor2D {
        match self.activation {
            Activation::Relu => {
                let data = z
                    .data()
                    .iter()
                    .zip(upstream.data())
                    .map(|(&zv, &g)| if zv > 0.0 { g } else { 0.0 })
                    .collect();
                Tensor2D::from_raw(z.rows(), z.cols(), data)
            }
        }
    }

    fn check_input(&self, batch: &Tensor2D) -> Result<()> {
        if batch.cols() != self.input_dim() {
            return Err(AmpError::ShapeMismatch {
                context: "model input",
                expected: format!("{} columns", self.input_dim()),
                actual: format!("{} columns", batch.cols()),
            });
        }
        Ok(())
    }
}

pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

fn validate_layer_sizes(layer_sizes: &[usize]) -> Result<()> {
    if layer_sizes.len() < 2 || layer_sizes.iter().any(|&s| s == 0) {
        return Err(AmpError::InvalidArgument(format!(
            "layer sizes must have >= 2 positive entries, got {layer_sizes:?}"
        )));
    }
    Ok(())
}
