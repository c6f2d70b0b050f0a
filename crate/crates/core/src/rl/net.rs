use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense layer with row-major `outputs x inputs` weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Layer {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
        }
    }

    /// Uniform in `±sqrt(6 / (fan_in + fan_out))`, zero bias.
    pub fn glorot<R: Rng + ?Sized>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let bound = (6.0 / (inputs + outputs) as f64).sqrt();
        let weights = (0..inputs * outputs).map(|_| rng.gen_range(-bound..=bound)).collect();
        Self {
            inputs,
            outputs,
            weights,
            bias: vec![0.0; outputs],
        }
    }

    fn apply(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(
            self.weights
                .chunks_exact(self.inputs)
                .zip(&self.bias)
                .map(|(row, b)| dot(row, x) + b),
        );
    }
}

/// Dot product with independent partial sums so the loop vectorizes.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 8];
    let (ca, cb) = (a.chunks_exact(8), b.chunks_exact(8));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for k in 0..8 {
            acc[k] += x[k] * y[k];
        }
    }
    acc.iter().sum::<f64>() + tail
}

/// Fully connected action-value network: ReLU hidden layers, linear output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueNet {
    pub layers: Vec<Layer>,
}

/// Parameter-shaped buffer: one `(weights, bias)` pair per layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<(Vec<f64>, Vec<f64>)>,
}

impl Gradients {
    pub fn zeros_like(net: &ValueNet) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| (vec![0.0; l.weights.len()], vec![0.0; l.bias.len()]))
                .collect(),
        }
    }

    pub fn get(&self, k: usize) -> f64 {
        let mut k = k;
        for (w, b) in &self.layers {
            if k < w.len() {
                return w[k];
            }
            k -= w.len();
            if k < b.len() {
                return b[k];
            }
            k -= b.len();
        }
        panic!("parameter index out of range");
    }
}

/// One regression sample: the target for a single action's output.
#[derive(Debug, Clone, Copy)]
pub struct ActionTarget<'a> {
    pub input: &'a [f64],
    pub action: usize,
    pub target: f64,
}

impl ValueNet {
    /// `input -> depth x hidden -> outputs`.
    pub fn new<R: Rng + ?Sized>(input: usize, hidden: usize, depth: usize, outputs: usize, rng: &mut R) -> Self {
        let dims = Self::dims_for(input, hidden, depth, outputs);
        Self {
            layers: dims.windows(2).map(|d| Layer::glorot(d[0], d[1], rng)).collect(),
        }
    }

    pub fn zeros(dims: &[usize]) -> Self {
        assert!(dims.len() >= 2, "need at least input and output widths");
        Self {
            layers: dims.windows(2).map(|d| Layer::zeros(d[0], d[1])).collect(),
        }
    }

    fn dims_for(input: usize, hidden: usize, depth: usize, outputs: usize) -> Vec<usize> {
        let mut dims = vec![input];
        dims.extend(std::iter::repeat(hidden).take(depth));
        dims.push(outputs);
        dims
    }

    pub fn input_len(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_len(&self) -> usize {
        self.layers.last().map_or(0, |l| l.outputs)
    }

    pub fn dims(&self) -> Vec<usize> {
        let mut d = vec![self.input_len()];
        d.extend(self.layers.iter().map(|l| l.outputs));
        d
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    fn param_mut(&mut self, k: usize) -> &mut f64 {
        let mut k = k;
        for l in &mut self.layers {
            if k < l.weights.len() {
                return &mut l.weights[k];
            }
            k -= l.weights.len();
            if k < l.bias.len() {
                return &mut l.bias[k];
            }
            k -= l.bias.len();
        }
        panic!("parameter index out of range");
    }

    /// Parameters flattened layer by layer, weights before bias.
    pub fn param(&self, k: usize) -> f64 {
        let mut k = k;
        for l in &self.layers {
            if k < l.weights.len() {
                return l.weights[k];
            }
            k -= l.weights.len();
            if k < l.bias.len() {
                return l.bias[k];
            }
            k -= l.bias.len();
        }
        panic!("parameter index out of range");
    }

    pub fn set_param(&mut self, k: usize, value: f64) {
        *self.param_mut(k) = value;
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_len() {
            return Err(Error::Shape {
                expected: self.input_len(),
                actual: x.len(),
            });
        }
        Ok(self.activations(x).pop().unwrap_or_default())
    }

    /// Input followed by every layer's output (post-activation).
    fn activations(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.to_vec());
        let last = self.layers.len() - 1;
        for (li, layer) in self.layers.iter().enumerate() {
            let mut out = Vec::with_capacity(layer.outputs);
            layer.apply(&acts[li], &mut out);
            if li < last {
                for v in &mut out {
                    *v = v.max(0.0);
                }
            }
            acts.push(out);
        }
        acts
    }

    /// Mean squared error over the batch, counting only each sample's chosen
    /// output, and its gradient.
    pub fn loss_and_gradients(&self, batch: &[ActionTarget<'_>]) -> Result<(f64, Gradients)> {
        let mut grads = Gradients::zeros_like(self);
        let mut loss = 0.0;
        let scale = 1.0 / batch.len().max(1) as f64;
        for s in batch {
            if s.input.len() != self.input_len() {
                return Err(Error::Shape {
                    expected: self.input_len(),
                    actual: s.input.len(),
                });
            }
            if s.action >= self.output_len() {
                return Err(Error::Shape {
                    expected: self.output_len(),
                    actual: s.action,
                });
            }
            let acts = self.activations(s.input);
            let err = acts[self.layers.len()][s.action] - s.target;
            loss += err * err * scale;

            let mut delta = vec![0.0; self.output_len()];
            delta[s.action] = 2.0 * err * scale;
            for li in (0..self.layers.len()).rev() {
                let layer = &self.layers[li];
                let input = &acts[li];
                let (gw, gb) = &mut grads.layers[li];
                for (o, &d) in delta.iter().enumerate() {
                    if d == 0.0 {
                        continue;
                    }
                    gb[o] += d;
                    let row = &mut gw[o * layer.inputs..(o + 1) * layer.inputs];
                    for (g, &v) in row.iter_mut().zip(input) {
                        *g += d * v;
                    }
                }
                if li == 0 {
                    break;
                }
                let mut back = vec![0.0; layer.inputs];
                for (o, &d) in delta.iter().enumerate() {
                    if d == 0.0 {
                        continue;
                    }
                    let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                    for (b, &w) in back.iter_mut().zip(row) {
                        *b += d * w;
                    }
                }
                // ReLU derivative, taken as 0 at the kink
                for (b, &a) in back.iter_mut().zip(input) {
                    if a <= 0.0 {
                        *b = 0.0;
                    }
                }
                delta = back;
            }
        }
        Ok((loss, grads))
    }

    pub fn loss(&self, batch: &[ActionTarget<'_>]) -> Result<f64> {
        let scale = 1.0 / batch.len().max(1) as f64;
        let mut loss = 0.0;
        for s in batch {
            let q = self.forward(s.input)?;
            let err = q[s.action] - s.target;
            loss += err * err * scale;
        }
        Ok(loss)
    }
}

/// Adam with the usual bias correction.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: i32,
    m: Gradients,
    v: Gradients,
}

impl Adam {
    pub fn new(net: &ValueNet, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: Gradients::zeros_like(net),
            v: Gradients::zeros_like(net),
        }
    }

    pub fn apply(&mut self, net: &mut ValueNet, grads: &Gradients) {
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step);
        let c2 = 1.0 - self.beta2.powi(self.step);
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.lr, self.eps);
        for (li, layer) in net.layers.iter_mut().enumerate() {
            let (gw, gb) = &grads.layers[li];
            let (mw, mb) = &mut self.m.layers[li];
            let (vw, vb) = &mut self.v.layers[li];
            for (params, g, m, v) in [
                (&mut layer.weights, gw, mw, vw),
                (&mut layer.bias, gb, mb, vb),
            ] {
                for k in 0..params.len() {
                    m[k] = b1 * m[k] + (1.0 - b1) * g[k];
                    v[k] = b2 * v[k] + (1.0 - b2) * g[k] * g[k];
                    params[k] -= lr * (m[k] / c1) / ((v[k] / c2).sqrt() + eps);
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetHeader {
    pub dims: Vec<usize>,
    pub depth: usize,
    pub hidden: usize,
    pub seed: u64,
}

/// Portable weight file: header plus all parameters in `param` order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetFile {
    pub header: NetHeader,
    pub params: Vec<f64>,
}

impl NetFile {
    pub fn from_net(net: &ValueNet, seed: u64) -> Self {
        let dims = net.dims();
        Self {
            header: NetHeader {
                depth: dims.len() - 2,
                hidden: if dims.len() > 2 { dims[1] } else { 0 },
                dims,
                seed,
            },
            params: (0..net.param_count()).map(|k| net.param(k)).collect(),
        }
    }

    pub fn to_net(&self) -> Result<ValueNet> {
        if self.header.dims.len() < 2 {
            return Err(Error::Domain("weight file needs at least two layer widths".into()));
        }
        let mut net = ValueNet::zeros(&self.header.dims);
        if net.param_count() != self.params.len() {
            return Err(Error::Shape {
                expected: net.param_count(),
                actual: self.params.len(),
            });
        }
        for (k, &p) in self.params.iter().enumerate() {
            net.set_param(k, p);
        }
        Ok(net)
    }
}
