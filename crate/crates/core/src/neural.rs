//! Small feed-forward network engine: dense layers, a handful of activations,
//! three losses, SGD/Adam and hand-written backpropagation. Shared by the MLP
//! classifier, both GANs and the VAE detector.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    LeakyRelu,
    Tanh,
    Logistic,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    BinaryCrossEntropy,
    Mse,
    /// `mean(-t * output)` with targets `t = +1` for real rows and `-1` for fake rows.
    WassersteinCritic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub width: usize,
    pub activation: Activation,
}

impl LayerSpec {
    pub fn new(width: usize, activation: Activation) -> Self {
        LayerSpec { width, activation }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub input_dim: usize,
    pub layers: Vec<LayerSpec>,
    pub loss: Loss,
    #[serde(default = "default_leaky_slope")]
    pub leaky_slope: f64,
}

fn default_leaky_slope() -> f64 {
    0.2
}

impl NetworkSpec {
    pub fn new(input_dim: usize, layers: Vec<LayerSpec>, loss: Loss) -> Self {
        NetworkSpec {
            input_dim,
            layers,
            loss,
            leaky_slope: default_leaky_slope(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::Config("network input_dim must be positive".into()));
        }
        if self.layers.is_empty() || self.layers.iter().any(|l| l.width == 0) {
            return Err(Error::Config("network needs at least one layer of positive width".into()));
        }
        if self.loss == Loss::BinaryCrossEntropy && self.layers.last().map(|l| l.activation) != Some(Activation::Logistic) {
            return Err(Error::Config("binary cross-entropy needs a logistic output layer".into()));
        }
        Ok(())
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.width)
    }

    pub fn widths(&self) -> Vec<usize> {
        self.layers.iter().map(|l| l.width).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub optimizer: Optimizer,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    #[serde(default)]
    pub weight_clip: Option<f64>,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        // a zero step is allowed: it leaves the network untouched
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning_rate must be a non-negative number".into()));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("epochs and batch_size must be positive".into()));
        }
        if let Some(c) = self.weight_clip {
            if !(c > 0.0) {
                return Err(Error::Config("weight_clip must be positive".into()));
            }
        }
        Ok(())
    }
}

/// Dense row-major matrix used for batches.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>], cols: usize) -> Result<Self> {
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::DimensionMismatch {
                    expected: cols,
                    got: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    /// `outputs x inputs`, row-major.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "NetworkFile", try_from = "NetworkFile")]
pub struct Network {
    pub spec: NetworkSpec,
    pub layers: Vec<Dense>,
}

/// Per-layer parameter gradients, shaped like the network.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn flatten(&self) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.bias)
            .flat_map(|(w, b)| w.iter().chain(b).copied())
            .collect()
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
        for (a, b) in self.bias.iter_mut().zip(&other.bias) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
    }
}

/// Activations kept from a forward pass for backpropagation.
#[derive(Debug, Clone)]
pub struct Trace {
    /// `activations[0]` is the input; `activations[l + 1]` the output of layer `l`.
    pub activations: Vec<Matrix>,
    pub pre_activations: Vec<Matrix>,
}

impl Trace {
    pub fn output(&self) -> &Matrix {
        self.activations.last().expect("trace holds the input at least")
    }
}

fn activate(a: Activation, z: f64, slope: f64) -> f64 {
    match a {
        Activation::Relu => z.max(0.0),
        Activation::LeakyRelu => {
            if z > 0.0 {
                z
            } else {
                slope * z
            }
        }
        Activation::Tanh => z.tanh(),
        Activation::Logistic => sigmoid(z),
        Activation::Linear => z,
    }
}

fn derivative(a: Activation, z: f64, out: f64, slope: f64) -> f64 {
    match a {
        Activation::Relu => {
            if z > 0.0 {
                1.0
            } else {
                0.0
            }
        }
        Activation::LeakyRelu => {
            if z > 0.0 {
                1.0
            } else {
                slope
            }
        }
        Activation::Tanh => 1.0 - out * out,
        Activation::Logistic => out * (1.0 - out),
        Activation::Linear => 1.0,
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

const PROB_EPS: f64 = 1e-12;

/// Loss value and its gradient with respect to the network output.
pub fn loss_and_output_gradient(loss: Loss, output: &Matrix, targets: &Matrix) -> Result<(f64, Matrix)> {
    if output.rows != targets.rows {
        return Err(Error::DimensionMismatch {
            expected: output.rows,
            got: targets.rows,
        });
    }
    let count = output.data.len().max(1) as f64;
    let mut grad = Matrix::zeros(output.rows, output.cols);
    let mut total = 0.0;
    match loss {
        Loss::BinaryCrossEntropy | Loss::Mse => {
            if targets.cols != output.cols {
                return Err(Error::DimensionMismatch {
                    expected: output.cols,
                    got: targets.cols,
                });
            }
            for ((g, &p), &y) in grad.data.iter_mut().zip(&output.data).zip(&targets.data) {
                if loss == Loss::Mse {
                    total += (p - y) * (p - y);
                    *g = 2.0 * (p - y) / count;
                } else {
                    let q = p.clamp(PROB_EPS, 1.0 - PROB_EPS);
                    total -= y * q.ln() + (1.0 - y) * (1.0 - q).ln();
                    *g = (q - y) / (q * (1.0 - q)) / count;
                }
            }
        }
        Loss::WassersteinCritic => {
            if targets.cols != 1 && targets.cols != output.cols {
                return Err(Error::DimensionMismatch {
                    expected: output.cols,
                    got: targets.cols,
                });
            }
            for i in 0..output.rows {
                for j in 0..output.cols {
                    let t = targets.data[i * targets.cols + if targets.cols == 1 { 0 } else { j }];
                    let p = output.data[i * output.cols + j];
                    total -= t * p;
                    grad.data[i * output.cols + j] = -t / count;
                }
            }
        }
    }
    Ok((total / count, grad))
}

impl Network {
    /// Glorot-uniform weights `U(-a, a)`, `a = sqrt(6 / (fan_in + fan_out))`; zero biases.
    pub fn init(spec: &NetworkSpec, seed: u64) -> Result<Network> {
        spec.validate()?;
        let mut rng = rng::seeded(seed);
        let mut inputs = spec.input_dim;
        let mut layers = Vec::with_capacity(spec.layers.len());
        for l in &spec.layers {
            let bound = (6.0 / (inputs + l.width) as f64).sqrt();
            let weights = (0..inputs * l.width).map(|_| rng.random_range(-bound..bound)).collect();
            layers.push(Dense {
                inputs,
                outputs: l.width,
                weights,
                bias: vec![0.0; l.width],
                activation: l.activation,
            });
            inputs = l.width;
        }
        Ok(Network {
            spec: spec.clone(),
            layers,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.spec.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.spec.output_dim()
    }

    pub fn forward_trace(&self, input: &Matrix) -> Result<Trace> {
        if input.cols != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: input.cols,
            });
        }
        let slope = self.spec.leaky_slope;
        let mut activations = vec![input.clone()];
        let mut pre_activations = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let prev = activations.last().expect("input present");
            let mut z = Matrix::zeros(prev.rows, layer.outputs);
            for i in 0..prev.rows {
                let x = prev.row(i);
                let zr = &mut z.data[i * layer.outputs..(i + 1) * layer.outputs];
                for (o, zo) in zr.iter_mut().enumerate() {
                    let w = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                    *zo = layer.bias[o] + w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
                }
            }
            let a = Matrix {
                rows: z.rows,
                cols: z.cols,
                data: z.data.iter().map(|&v| activate(layer.activation, v, slope)).collect(),
            };
            pre_activations.push(z);
            activations.push(a);
        }
        Ok(Trace {
            activations,
            pre_activations,
        })
    }

    pub fn forward_matrix(&self, input: &Matrix) -> Result<Matrix> {
        let mut trace = self.forward_trace(input)?;
        Ok(trace.activations.pop().expect("non-empty trace"))
    }

    pub fn forward(&self, batch: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let input = Matrix::from_rows(batch, self.input_dim())?;
        Ok(self.forward_matrix(&input)?.to_rows())
    }

    /// Backpropagates `d_output` (loss gradient w.r.t. the network output)
    /// through a recorded trace. Returns parameter gradients and the gradient
    /// with respect to the input.
    pub fn backward(&self, trace: &Trace, d_output: &Matrix) -> (Gradients, Matrix) {
        let slope = self.spec.leaky_slope;
        let mut weights = vec![Vec::new(); self.layers.len()];
        let mut bias = vec![Vec::new(); self.layers.len()];
        let mut delta = d_output.clone();
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let z = &trace.pre_activations[l];
            let out = &trace.activations[l + 1];
            let prev = &trace.activations[l];
            for ((d, &zv), &ov) in delta.data.iter_mut().zip(&z.data).zip(&out.data) {
                *d *= derivative(layer.activation, zv, ov, slope);
            }
            let mut gw = vec![0.0; layer.outputs * layer.inputs];
            let mut gb = vec![0.0; layer.outputs];
            let mut d_prev = Matrix::zeros(prev.rows, layer.inputs);
            for i in 0..prev.rows {
                let x = prev.row(i);
                let dz = &delta.data[i * layer.outputs..(i + 1) * layer.outputs];
                let dp = &mut d_prev.data[i * layer.inputs..(i + 1) * layer.inputs];
                for (o, &g) in dz.iter().enumerate() {
                    if g == 0.0 {
                        continue;
                    }
                    gb[o] += g;
                    let row_w = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                    let row_g = &mut gw[o * layer.inputs..(o + 1) * layer.inputs];
                    for k in 0..layer.inputs {
                        row_g[k] += g * x[k];
                        dp[k] += g * row_w[k];
                    }
                }
            }
            weights[l] = gw;
            bias[l] = gb;
            delta = d_prev;
        }
        (Gradients { weights, bias }, delta)
    }

    pub fn loss_and_gradients(&self, inputs: &Matrix, targets: &Matrix) -> Result<(f64, Gradients)> {
        let trace = self.forward_trace(inputs)?;
        let (loss, d_out) = loss_and_output_gradient(self.spec.loss, trace.output(), targets)?;
        Ok((loss, self.backward(&trace, &d_out).0))
    }

    pub fn loss(&self, inputs: &Matrix, targets: &Matrix) -> Result<f64> {
        let out = self.forward_matrix(inputs)?;
        loss_and_output_gradient(self.spec.loss, &out, targets).map(|(l, _)| l)
    }

    pub fn zero_gradients(&self) -> Gradients {
        Gradients {
            weights: self.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            bias: self.layers.iter().map(|l| vec![0.0; l.bias.len()]).collect(),
        }
    }

    /// Flat parameter vector in layer order (weights then biases per layer).
    pub fn parameters(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.bias).copied())
            .collect()
    }

    pub fn set_parameters(&mut self, params: &[f64]) {
        let mut it = params.iter().copied();
        for l in &mut self.layers {
            for w in l.weights.iter_mut().chain(l.bias.iter_mut()) {
                *w = it.next().expect("parameter vector too short");
            }
        }
    }

    pub fn clip_weights(&mut self, c: f64) {
        for l in &mut self.layers {
            for w in l.weights.iter_mut().chain(l.bias.iter_mut()) {
                *w = w.clamp(-c, c);
            }
        }
    }

    pub fn max_abs_weight(&self) -> f64 {
        self.parameters().iter().fold(0.0, |m, w| m.max(w.abs()))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&NetworkFile::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Network> {
        serde_json::from_str::<NetworkFile>(text)?.into_network()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()? + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Network> {
        let path = path.as_ref();
        Network::from_json(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }
}

pub fn init_network(spec: &NetworkSpec, seed: u64) -> Result<Network> {
    Network::init(spec, seed)
}

/// Optimizer with its running state (Adam: beta1 0.9, beta2 0.999, eps 1e-8).
#[derive(Debug, Clone)]
pub struct OptimizerState {
    kind: Optimizer,
    learning_rate: f64,
    step: i32,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl OptimizerState {
    pub const BETA1: f64 = 0.9;
    pub const BETA2: f64 = 0.999;
    pub const EPSILON: f64 = 1e-8;

    pub fn new(kind: Optimizer, learning_rate: f64, net: &Network) -> Self {
        let n = net.parameters().len();
        OptimizerState {
            kind,
            learning_rate,
            step: 0,
            m: vec![0.0; n],
            v: vec![0.0; n],
        }
    }

    pub fn apply(&mut self, net: &mut Network, grads: &Gradients) {
        self.step += 1;
        let lr = self.learning_rate;
        let (b1, b2) = (Self::BETA1, Self::BETA2);
        let c1 = 1.0 - b1.powi(self.step);
        let c2 = 1.0 - b2.powi(self.step);
        let mut k = 0;
        for (layer, (gw, gb)) in net.layers.iter_mut().zip(grads.weights.iter().zip(&grads.bias)) {
            for (p, &g) in layer.weights.iter_mut().chain(layer.bias.iter_mut()).zip(gw.iter().chain(gb)) {
                match self.kind {
                    Optimizer::Sgd => *p -= lr * g,
                    Optimizer::Adam => {
                        self.m[k] = b1 * self.m[k] + (1.0 - b1) * g;
                        self.v[k] = b2 * self.v[k] + (1.0 - b2) * g * g;
                        let m_hat = self.m[k] / c1;
                        let v_hat = self.v[k] / c2;
                        *p -= lr * m_hat / (v_hat.sqrt() + Self::EPSILON);
                    }
                }
                k += 1;
            }
        }
    }
}

/// Mini-batch training; returns the trained network and the mean loss of
/// every epoch. Batches are reshuffled each epoch from the configured seed.
pub fn train(
    mut net: Network,
    inputs: &[Vec<f64>],
    targets: &[Vec<f64>],
    cfg: &TrainConfig,
) -> Result<(Network, Vec<f64>)> {
    cfg.validate()?;
    if inputs.len() != targets.len() {
        return Err(Error::Precondition(format!(
            "{} input rows but {} target rows",
            inputs.len(),
            targets.len()
        )));
    }
    if inputs.is_empty() {
        return Err(Error::Precondition("no training rows".into()));
    }
    let target_cols = targets[0].len();
    let x = Matrix::from_rows(inputs, net.input_dim())?;
    let y = Matrix::from_rows(targets, target_cols)?;
    let n = x.rows;
    let batch = cfg.batch_size.min(n);
    let mut opt = OptimizerState::new(cfg.optimizer, cfg.learning_rate, &net);
    let mut rng = rng::seeded(cfg.seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        if batch < n {
            order.shuffle(&mut rng);
        }
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(batch) {
            let (bx, by) = if batch < n { (gather(&x, chunk), gather(&y, chunk)) } else { (x.clone(), y.clone()) };
            let (loss, grads) = net.loss_and_gradients(&bx, &by)?;
            if !loss.is_finite() {
                return Err(Error::Diverged(format!("non-finite loss at epoch {epoch}")));
            }
            epoch_loss += loss * chunk.len() as f64;
            opt.apply(&mut net, &grads);
            if let Some(c) = cfg.weight_clip {
                net.clip_weights(c);
            }
        }
        history.push(epoch_loss / n as f64);
    }
    Ok((net, history))
}

pub(crate) fn gather(m: &Matrix, rows: &[usize]) -> Matrix {
    let mut data = Vec::with_capacity(rows.len() * m.cols);
    for &i in rows {
        data.extend_from_slice(m.row(i));
    }
    Matrix {
        rows: rows.len(),
        cols: m.cols,
        data,
    }
}

/// On-disk form: spec plus flat weight arrays written with 17 significant digits.
#[derive(Debug, Serialize, Deserialize)]
struct NetworkFile {
    format: String,
    version: u32,
    spec: NetworkSpec,
    layers: Vec<LayerFile>,
}

#[derive(Debug, Serialize, Deserialize)]
struct LayerFile {
    #[serde(with = "precise")]
    weights: Vec<f64>,
    #[serde(with = "precise")]
    bias: Vec<f64>,
}

const NETWORK_FORMAT: &str = "fraudkit-network";
const NETWORK_VERSION: u32 = 1;

impl From<&Network> for NetworkFile {
    fn from(net: &Network) -> Self {
        NetworkFile {
            format: NETWORK_FORMAT.into(),
            version: NETWORK_VERSION,
            spec: net.spec.clone(),
            layers: net
                .layers
                .iter()
                .map(|l| LayerFile {
                    weights: l.weights.clone(),
                    bias: l.bias.clone(),
                })
                .collect(),
        }
    }
}

impl From<Network> for NetworkFile {
    fn from(net: Network) -> Self {
        NetworkFile::from(&net)
    }
}

impl TryFrom<NetworkFile> for Network {
    type Error = Error;

    fn try_from(file: NetworkFile) -> Result<Network> {
        file.into_network()
    }
}

impl NetworkFile {
    fn into_network(self) -> Result<Network> {
        if self.format != NETWORK_FORMAT || self.version != NETWORK_VERSION {
            return Err(Error::Data(format!(
                "unsupported network file {} v{}",
                self.format, self.version
            )));
        }
        let mut net = Network::init(&self.spec, 0)?;
        if net.layers.len() != self.layers.len() {
            return Err(Error::Data("layer count does not match spec".into()));
        }
        for (dst, src) in net.layers.iter_mut().zip(self.layers) {
            if dst.weights.len() != src.weights.len() || dst.bias.len() != src.bias.len() {
                return Err(Error::Data("layer shape does not match spec".into()));
            }
            dst.weights = src.weights;
            dst.bias = src.bias;
        }
        Ok(net)
    }
}

/// `Vec<f64>` as decimal strings in `{:.16e}` form (17 significant digits).
pub(crate) mod precise {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(values: &[f64], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(values.iter().map(|v| format!("{v:.16e}")))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        let raw = Vec::<String>::deserialize(d)?;
        raw.iter()
            .map(|s| s.parse::<f64>().map_err(serde::de::Error::custom))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(input: usize, layers: &[(usize, Activation)], loss: Loss) -> NetworkSpec {
        NetworkSpec::new(input, layers.iter().map(|&(w, a)| LayerSpec::new(w, a)).collect(), loss)
    }

    fn cfg(optimizer: Optimizer, lr: f64, epochs: usize) -> TrainConfig {
        TrainConfig {
            optimizer,
            learning_rate: lr,
            epochs,
            batch_size: 1024,
            seed: 1,
            weight_clip: None,
        }
    }

    #[test]
    fn init_shapes_and_determinism() {
        let s = spec(2, &[(1, Activation::Linear)], Loss::Mse);
        let a = Network::init(&s, 3).unwrap();
        assert_eq!(a.layers[0].weights.len(), 2);
        assert_eq!((a.layers[0].outputs, a.layers[0].inputs), (1, 2));
        assert_eq!(a.layers[0].bias, vec![0.0]);
        assert_eq!(a, Network::init(&s, 3).unwrap());
        assert_ne!(a, Network::init(&s, 4).unwrap());
        let bound = (6.0f64 / 3.0).sqrt();
        assert!(a.layers[0].weights.iter().all(|w| w.abs() <= bound));
    }

    #[test]
    fn spec_validation() {
        assert!(spec(2, &[], Loss::Mse).validate().is_err());
        assert!(spec(2, &[(1, Activation::Linear)], Loss::BinaryCrossEntropy).validate().is_err());
        assert!(spec(0, &[(1, Activation::Linear)], Loss::Mse).validate().is_err());
    }

    #[test]
    fn forward_examples() {
        let mut net = Network::init(&spec(3, &[(2, Activation::Logistic)], Loss::Mse), 0).unwrap();
        net.set_parameters(&[0.0; 8]);
        assert_eq!(net.forward(&[vec![1.0, -2.0, 3.0]]).unwrap(), vec![vec![0.5, 0.5]]);

        let mut net = Network::init(&spec(1, &[(1, Activation::Linear)], Loss::Mse), 0).unwrap();
        net.set_parameters(&[2.0, 1.0]);
        assert_eq!(net.forward(&[vec![3.0]]).unwrap(), vec![vec![7.0]]);

        let mut net = Network::init(&spec(2, &[(2, Activation::Relu)], Loss::Mse), 0).unwrap();
        net.set_parameters(&[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        assert_eq!(net.forward(&[vec![-1.0, 2.0]]).unwrap(), vec![vec![0.0, 2.0]]);

        assert!(net.forward(&[vec![1.0]]).is_err());
    }

    #[test]
    fn linear_neuron_recovers_slope() {
        let xs: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64 / 19.0]).collect();
        let ys: Vec<Vec<f64>> = xs.iter().map(|x| vec![2.0 * x[0] + 1.0]).collect();
        // closed-form least squares on exact data gives slope 2, intercept 1
        let net = Network::init(&spec(1, &[(1, Activation::Linear)], Loss::Mse), 5).unwrap();
        let (net, hist) = train(net, &xs, &ys, &cfg(Optimizer::Adam, 0.05, 500)).unwrap();
        assert_eq!(hist.len(), 500);
        assert!((net.layers[0].weights[0] - 2.0).abs() < 0.05, "{:?}", net.layers[0]);
    }

    #[test]
    fn zero_learning_rate_is_a_no_op() {
        let xs = vec![vec![0.1, 0.2], vec![0.9, 0.4]];
        let ys = vec![vec![1.0], vec![0.0]];
        let net = Network::init(&spec(2, &[(3, Activation::Tanh), (1, Activation::Logistic)], Loss::BinaryCrossEntropy), 2).unwrap();
        for opt in [Optimizer::Sgd, Optimizer::Adam] {
            let (trained, hist) = train(net.clone(), &xs, &ys, &cfg(opt, 0.0, 10)).unwrap();
            assert_eq!(trained, net);
            assert!(hist.windows(2).all(|w| w[0] == w[1]));
        }
    }

    #[test]
    fn logistic_neuron_separates_blobs() {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for i in 0..20 {
            let t = i as f64 / 20.0;
            xs.push(vec![0.1 + 0.2 * t, 0.2 + 0.1 * t]);
            ys.push(vec![0.0]);
            xs.push(vec![0.7 + 0.2 * t, 0.8 - 0.1 * t]);
            ys.push(vec![1.0]);
        }
        let net = Network::init(&spec(2, &[(1, Activation::Logistic)], Loss::BinaryCrossEntropy), 0).unwrap();
        let (net, hist) = train(net, &xs, &ys, &cfg(Optimizer::Adam, 0.1, 300)).unwrap();
        let out = net.forward(&xs).unwrap();
        let correct = out.iter().zip(&ys).filter(|(p, y)| (p[0] >= 0.5) == (y[0] == 1.0)).count();
        assert_eq!(correct, xs.len());
        assert!(hist.last().unwrap() <= &hist[0]);
    }

    #[test]
    fn weight_clip_is_exact() {
        let xs = vec![vec![0.3, 0.9], vec![0.8, 0.1]];
        let ys = vec![vec![1.0], vec![-1.0]];
        let net = Network::init(
            &spec(2, &[(8, Activation::LeakyRelu), (1, Activation::Linear)], Loss::WassersteinCritic),
            4,
        )
        .unwrap();
        let mut c = cfg(Optimizer::Adam, 0.01, 5);
        c.weight_clip = Some(0.01);
        let (net, _) = train(net, &xs, &ys, &c).unwrap();
        assert!(net.max_abs_weight() <= 0.01);
    }

    #[test]
    fn divergence_is_reported() {
        let xs = vec![vec![1e200], vec![-1e200]];
        let ys = vec![vec![1e200], vec![0.0]];
        let net = Network::init(&spec(1, &[(1, Activation::Linear)], Loss::Mse), 0).unwrap();
        let err = train(net, &xs, &ys, &cfg(Optimizer::Sgd, 1.0, 3)).unwrap_err();
        assert!(matches!(err, Error::Diverged(_)));
    }

    #[test]
    fn json_round_trip_is_exact() {
        let net = Network::init(&spec(3, &[(4, Activation::Tanh), (1, Activation::Logistic)], Loss::BinaryCrossEntropy), 8).unwrap();
        let text = net.to_json().unwrap();
        assert!(text.contains("fraudkit-network"));
        assert_eq!(Network::from_json(&text).unwrap(), net);
    }
}
