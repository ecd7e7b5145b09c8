//! Small dense-network engine in f64: batched forward and reverse passes,
//! the regularized regression loss, and Adam.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Identity,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    /// out x in
    pub w: DMatrix<f64>,
    pub b: DVector<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn zeros(input: usize, output: usize, activation: Activation) -> Self {
        Self {
            w: DMatrix::zeros(output, input),
            b: DVector::zeros(output),
            activation,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.w.nrows()
    }
}

/// Chain of affine layers; every layer but the last applies ReLU.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseNet {
    pub layers: Vec<Layer>,
}

/// `sse_scale * sum (yhat - y)^2 + alpha / (len - 1) * sum (yhat_{t+1} - yhat_t)^2`
/// per sample, averaged over the batch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossSpec {
    pub sse_scale: f64,
    pub alpha: f64,
}

impl LossSpec {
    pub fn mse(len: usize) -> Self {
        Self {
            sse_scale: 1.0 / len as f64,
            alpha: 0.0,
        }
    }

    pub fn smoothed(len: usize, alpha: f64) -> Self {
        Self {
            sse_scale: 1.0 / len as f64,
            alpha,
        }
    }
}

pub fn loss_mse(yhat: &[f64], y: &[f64]) -> Result<f64> {
    if yhat.len() != y.len() {
        return Err(Error::dims(y.len(), yhat.len(), "loss_mse"));
    }
    if y.is_empty() {
        return Ok(0.0);
    }
    Ok(yhat
        .iter()
        .zip(y)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        / y.len() as f64)
}

pub fn loss_smooth(yhat: &[f64], alpha: f64) -> f64 {
    if yhat.len() < 2 {
        return 0.0;
    }
    let s: f64 = yhat.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum();
    alpha / (yhat.len() - 1) as f64 * s
}

impl LossSpec {
    pub fn value(&self, yhat: &[f64], y: &[f64]) -> Result<f64> {
        if yhat.len() != y.len() {
            return Err(Error::dims(y.len(), yhat.len(), "loss"));
        }
        let sse: f64 = yhat.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum();
        Ok(self.sse_scale * sse + loss_smooth(yhat, self.alpha))
    }

    // d loss / d yhat for one sample, scaled by `weight`
    fn gradient_into(&self, yhat: &[f64], y: &[f64], weight: f64, out: &mut [f64]) {
        let n = yhat.len();
        for t in 0..n {
            out[t] = 2.0 * self.sse_scale * (yhat[t] - y[t]) * weight;
        }
        if self.alpha != 0.0 && n >= 2 {
            let c = 2.0 * self.alpha / (n - 1) as f64 * weight;
            for t in 0..n - 1 {
                let d = c * (yhat[t + 1] - yhat[t]);
                out[t + 1] += d;
                out[t] -= d;
            }
        }
    }
}

/// Gradients with the same shapes as the network parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub w: Vec<DMatrix<f64>>,
    pub b: Vec<DVector<f64>>,
}

impl DenseNet {
    /// Zero-initialized network with layer widths `dims`.
    pub fn zeros(dims: &[usize]) -> Result<Self> {
        if dims.len() < 2 || dims.contains(&0) {
            return Err(Error::InvalidParameter(format!(
                "bad layer widths {dims:?}"
            )));
        }
        let last = dims.len() - 2;
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(i, d)| {
                let act = if i == last {
                    Activation::Identity
                } else {
                    Activation::Relu
                };
                Layer::zeros(d[0], d[1], act)
            })
            .collect();
        Ok(Self { layers })
    }

    /// He-uniform weights, `U(-sqrt(6/fan_in), sqrt(6/fan_in))`, zero biases.
    pub fn he_uniform<R: Rng>(dims: &[usize], rng: &mut R) -> Result<Self> {
        let mut net = Self::zeros(dims)?;
        for layer in &mut net.layers {
            let bound = (6.0 / layer.input_dim() as f64).sqrt();
            // row-major fill so the draw order does not depend on storage
            let (rows, cols) = layer.w.shape();
            for i in 0..rows {
                for j in 0..cols {
                    layer.w[(i, j)] = rng.random_range(-bound..bound);
                }
            }
        }
        Ok(net)
    }

    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidParameter("network without layers".into()));
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].output_dim() != pair[1].input_dim() {
                return Err(Error::dims(
                    pair[0].output_dim(),
                    pair[1].input_dim(),
                    "layer chain",
                ));
            }
            let _ = i;
        }
        for l in &layers {
            if l.b.len() != l.output_dim() {
                return Err(Error::dims(l.output_dim(), l.b.len(), "layer bias"));
            }
        }
        Ok(Self { layers })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].output_dim()
    }

    pub fn dims(&self) -> Vec<usize> {
        let mut d = vec![self.input_dim()];
        d.extend(self.layers.iter().map(|l| l.output_dim()));
        d
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.w.iter().chain(l.b.iter()).all(|v| v.is_finite()))
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        let out = self.forward_batch(&DMatrix::from_column_slice(x.len(), 1, x))?;
        Ok(out.as_slice().to_vec())
    }

    /// Columns of `x` are samples.
    pub fn forward_batch(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.nrows() != self.input_dim() {
            return Err(Error::dims(self.input_dim(), x.nrows(), "network input"));
        }
        let mut a = x.clone();
        for layer in &self.layers {
            a = affine(layer, &a);
            if layer.activation == Activation::Relu {
                a.apply(|v| *v = v.max(0.0));
            }
        }
        Ok(a)
    }

    /// Mean loss over the batch columns and its exact gradient.
    pub fn backward_batch(
        &self,
        x: &DMatrix<f64>,
        y: &DMatrix<f64>,
        loss: &LossSpec,
    ) -> Result<(f64, Gradients)> {
        if x.nrows() != self.input_dim() {
            return Err(Error::dims(self.input_dim(), x.nrows(), "network input"));
        }
        if y.nrows() != self.output_dim() || y.ncols() != x.ncols() {
            return Err(Error::dims(
                self.output_dim() * x.ncols(),
                y.len(),
                "network target",
            ));
        }
        let batch = x.ncols();
        if batch == 0 {
            return Err(Error::InvalidParameter("empty batch".into()));
        }

        // activations[l] is the input to layer l
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(x.clone());
        for layer in &self.layers {
            let mut z = affine(layer, activations.last().expect("nonempty"));
            if layer.activation == Activation::Relu {
                z.apply(|v| *v = v.max(0.0));
            }
            activations.push(z);
        }
        let yhat = activations.last().expect("nonempty");

        let weight = 1.0 / batch as f64;
        let mut total = 0.0;
        let mut delta = DMatrix::zeros(yhat.nrows(), batch);
        for j in 0..batch {
            let (pred, target) = (yhat.column(j), y.column(j));
            total += loss.value(pred.as_slice(), target.as_slice())?;
            loss.gradient_into(
                pred.as_slice(),
                target.as_slice(),
                weight,
                delta.column_mut(j).as_mut_slice(),
            );
        }

        let n = self.layers.len();
        let mut gw = vec![DMatrix::zeros(0, 0); n];
        let mut gb = vec![DVector::zeros(0); n];
        for l in (0..n).rev() {
            let layer = &self.layers[l];
            if layer.activation == Activation::Relu {
                // derivative taken as 0 where the unit is not strictly active
                delta.zip_apply(&activations[l + 1], |d, a| {
                    if a <= 0.0 {
                        *d = 0.0
                    }
                });
            }
            gw[l] = &delta * activations[l].transpose();
            gb[l] = delta.column_sum();
            if l > 0 {
                delta = layer.w.transpose() * &delta;
            }
        }
        Ok((total * weight, Gradients { w: gw, b: gb }))
    }
}

fn affine(layer: &Layer, a: &DMatrix<f64>) -> DMatrix<f64> {
    let mut z = &layer.w * a;
    for mut col in z.column_iter_mut() {
        col += &layer.b;
    }
    z
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub step: u64,
    m: Gradients,
    v: Gradients,
}

impl AdamState {
    pub fn new(net: &DenseNet, config: AdamConfig) -> Self {
        let zeros = Gradients {
            w: net
                .layers
                .iter()
                .map(|l| DMatrix::zeros(l.w.nrows(), l.w.ncols()))
                .collect(),
            b: net
                .layers
                .iter()
                .map(|l| DVector::zeros(l.b.len()))
                .collect(),
        };
        Self {
            config,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub fn step(&mut self, net: &mut DenseNet, grads: &Gradients) -> Result<()> {
        if grads.w.len() != net.layers.len() || grads.b.len() != net.layers.len() {
            return Err(Error::dims(
                net.layers.len(),
                grads.w.len(),
                "Adam gradients",
            ));
        }
        for (l, layer) in net.layers.iter().enumerate() {
            if grads.w[l].shape() != layer.w.shape() || grads.b[l].len() != layer.b.len() {
                return Err(Error::dims(
                    layer.w.len(),
                    grads.w[l].len(),
                    "Adam gradients",
                ));
            }
        }
        self.step += 1;
        let AdamConfig {
            lr,
            beta1,
            beta2,
            eps,
        } = self.config;
        let c1 = 1.0 - beta1.powi(self.step as i32);
        let c2 = 1.0 - beta2.powi(self.step as i32);
        let update = |p: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64]| {
            for i in 0..p.len() {
                m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
                v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
                p[i] -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + eps);
            }
        };
        for (l, layer) in net.layers.iter_mut().enumerate() {
            update(
                layer.w.as_mut_slice(),
                grads.w[l].as_slice(),
                self.m.w[l].as_mut_slice(),
                self.v.w[l].as_mut_slice(),
            );
            update(
                layer.b.as_mut_slice(),
                grads.b[l].as_slice(),
                self.m.b[l].as_mut_slice(),
                self.v.b[l].as_mut_slice(),
            );
        }
        Ok(())
    }
}
