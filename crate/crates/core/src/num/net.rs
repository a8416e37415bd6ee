//! Feed-forward networks over the tape.
//!
//! Parameter layout is frozen for checkpoints and gradients alike: for
//! each layer, the weight matrix in row-major order (fan-in rows by
//! fan-out columns) followed by the bias vector.

use serde::{Deserialize, Serialize};

use super::matrix::Matrix;
use super::rng::RngStream;
use super::tape::{logistic, Tape, TensorId};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Tanh,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputHead {
    /// Linear output.
    Identity,
    /// Squashes every output into (0,1).
    Logistic,
}

/// Multi-layer perceptron with a fixed hidden nonlinearity and output head.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    layer_sizes: Vec<usize>,
    weights: Vec<Matrix>,
    biases: Vec<Vec<f64>>,
    hidden: Activation,
    head: OutputHead,
}

/// Tape handles for one bound copy of the network parameters.
pub struct BoundParams {
    weights: Vec<TensorId>,
    biases: Vec<TensorId>,
}

impl Mlp {
    /// Zero-initialized network. `layer_sizes` runs input..output and
    /// needs at least two entries, all positive.
    pub fn new(layer_sizes: &[usize], hidden: Activation, head: OutputHead) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return Err(Error::Config(
                "network needs at least input and output layers".into(),
            ));
        }
        if layer_sizes.iter().any(|&n| n == 0) {
            return Err(Error::Config("layer sizes must be positive".into()));
        }
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for w in layer_sizes.windows(2) {
            weights.push(Matrix::zeros(w[0], w[1]));
            biases.push(vec![0.0; w[1]]);
        }
        Ok(Mlp {
            layer_sizes: layer_sizes.to_vec(),
            weights,
            biases,
            hidden,
            head,
        })
    }

    /// Builds a hidden stack of `layers` layers of width `width` between
    /// `input` and `output`.
    pub fn with_hidden(
        input: usize,
        layers: usize,
        width: usize,
        output: usize,
        hidden: Activation,
        head: OutputHead,
    ) -> Result<Self> {
        let mut sizes = vec![input];
        sizes.extend(std::iter::repeat(width).take(layers));
        sizes.push(output);
        Mlp::new(&sizes, hidden, head)
    }

    /// He-style uniform fan-in init: weights ~ U(-sqrt(6/fan_in), +sqrt(6/fan_in)),
    /// biases zero.
    pub fn init_fan_in(&mut self, rng: &mut RngStream) {
        for w in &mut self.weights {
            let limit = (6.0 / w.rows() as f64).sqrt();
            for v in w.data_mut() {
                *v = rng.range(-limit, limit);
            }
        }
        for b in &mut self.biases {
            b.iter_mut().for_each(|v| *v = 0.0);
        }
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn input_size(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_size(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn hidden_activation(&self) -> Activation {
        self.hidden
    }

    pub fn output_head(&self) -> OutputHead {
        self.head
    }

    /// Total parameter count: sum over layers of (n_in + 1) * n_out.
    pub fn param_count(&self) -> usize {
        self.layer_sizes
            .windows(2)
            .map(|w| (w[0] + 1) * w[1])
            .sum()
    }

    /// Single-input forward pass. Goes through the batched kernel so a
    /// lone state and a batch row produce bit-identical outputs.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.input_size() {
            return Err(Error::Config(format!(
                "input length {} does not match network input size {}",
                input.len(),
                self.input_size()
            )));
        }
        Ok(self.forward_batch(&Matrix::from_row(input)).data().to_vec())
    }

    /// Batched forward pass, rows are independent inputs.
    pub fn forward_batch(&self, x: &Matrix) -> Matrix {
        assert_eq!(x.cols(), self.input_size(), "batch input width mismatch");
        let last = self.weights.len() - 1;
        let mut h = x.matmul(&self.weights[0]);
        add_bias(&mut h, &self.biases[0]);
        if last > 0 {
            apply(&mut h, self.hidden);
        }
        for l in 1..=last {
            let mut z = h.matmul(&self.weights[l]);
            add_bias(&mut z, &self.biases[l]);
            if l < last {
                apply(&mut z, self.hidden);
            }
            h = z;
        }
        if let OutputHead::Logistic = self.head {
            for v in h.data_mut() {
                *v = logistic(*v);
            }
        }
        h
    }

    /// Registers all parameters on the tape (weights then bias, layer by
    /// layer) and returns their handles. Gradient order matches
    /// [`Mlp::flat_params`].
    pub fn bind(&self, tape: &mut Tape) -> BoundParams {
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            weights.push(tape.param(w.clone()));
            biases.push(tape.param(Matrix::from_vec(1, b.len(), b.clone())));
        }
        BoundParams { weights, biases }
    }

    /// Like [`Mlp::bind`] but as constants: the forward value participates,
    /// no gradient is produced (a frozen critic inside an actor update).
    pub fn bind_frozen(&self, tape: &mut Tape) -> BoundParams {
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            weights.push(tape.constant(w.clone()));
            biases.push(tape.constant(Matrix::from_vec(1, b.len(), b.clone())));
        }
        BoundParams { weights, biases }
    }

    /// Records the forward pass on the tape.
    pub fn tape_forward(&self, tape: &mut Tape, x: TensorId, params: &BoundParams) -> TensorId {
        let last = self.weights.len() - 1;
        let mut h = x;
        for l in 0..=last {
            let z = tape.matmul(h, params.weights[l]);
            let z = tape.add_row(z, params.biases[l]);
            h = if l < last {
                match self.hidden {
                    Activation::Relu => tape.relu(z),
                    Activation::Tanh => tape.tanh(z),
                }
            } else {
                match self.head {
                    OutputHead::Identity => z,
                    OutputHead::Logistic => tape.logistic(z),
                }
            };
        }
        h
    }

    /// Flattened parameters (layer by layer, weights row-major then bias).
    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend_from_slice(w.data());
            out.extend_from_slice(b);
        }
        out
    }

    pub fn set_flat_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::Config(format!(
                "parameter vector length {} does not match network size {}",
                flat.len(),
                self.param_count()
            )));
        }
        let mut at = 0;
        for (w, b) in self.weights.iter_mut().zip(&mut self.biases) {
            let n = w.data().len();
            w.data_mut().copy_from_slice(&flat[at..at + n]);
            at += n;
            let nb = b.len();
            b.copy_from_slice(&flat[at..at + nb]);
            at += nb;
        }
        Ok(())
    }

    /// Soft update toward `src`: theta <- (1 - rate) * theta + rate * src.
    pub fn soft_update_from(&mut self, src: &Mlp, rate: f64) {
        for (w, ws) in self.weights.iter_mut().zip(&src.weights) {
            for (v, &s) in w.data_mut().iter_mut().zip(ws.data()) {
                *v += rate * (s - *v);
            }
        }
        for (b, bs) in self.biases.iter_mut().zip(&src.biases) {
            for (v, &s) in b.iter_mut().zip(bs) {
                *v += rate * (s - *v);
            }
        }
    }

    pub fn to_checkpoint(&self, optimizer: &str, step_count: u64) -> NetCheckpoint {
        NetCheckpoint {
            layer_sizes: self.layer_sizes.clone(),
            activation: self.hidden,
            output_head: self.head,
            weights: self.flat_params(),
            optimizer: optimizer.to_string(),
            step_count,
        }
    }

    pub fn from_checkpoint(cp: &NetCheckpoint) -> Result<Self> {
        let mut net = Mlp::new(&cp.layer_sizes, cp.activation, cp.output_head)?;
        net.set_flat_params(&cp.weights)?;
        Ok(net)
    }
}

/// JSON checkpoint document. Field order is part of the format; 64-bit
/// values survive the round trip bit-exactly because serde_json emits
/// shortest-round-trip decimal floats.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetCheckpoint {
    pub layer_sizes: Vec<usize>,
    pub activation: Activation,
    pub output_head: OutputHead,
    /// Flat weight array: per layer, weight matrix row-major then bias.
    pub weights: Vec<f64>,
    pub optimizer: String,
    pub step_count: u64,
}

fn add_bias(m: &mut Matrix, bias: &[f64]) {
    for i in 0..m.rows() {
        for (v, &b) in m.row_mut(i).iter_mut().zip(bias) {
            *v += b;
        }
    }
}

fn apply(m: &mut Matrix, act: Activation) {
    match act {
        Activation::Relu => {
            for v in m.data_mut() {
                *v = v.max(0.0);
            }
        }
        Activation::Tanh => {
            for v in m.data_mut() {
                *v = v.tanh();
            }
        }
    }
}
