//! Bernoulli restricted Boltzmann machine trained by one-step contrastive
//! divergence, and MLP initialization from a pretrained stack.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::dense::{sigmoid, Activation, Dense, Head, Mlp};
use crate::error::{Error, Result};
use crate::linalg::{gemm, Op};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rbm {
    pub visible: usize,
    pub hidden: usize,
    /// `visible × hidden`, row-major.
    pub w: Vec<f64>,
    pub b_visible: Vec<f64>,
    pub b_hidden: Vec<f64>,
}

impl Rbm {
    /// Weights drawn from N(0, 0.01²), zero biases.
    pub fn new(visible: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        let normal = Normal::new(0.0, 0.01).expect("valid normal");
        Self {
            visible,
            hidden,
            w: (0..visible * hidden).map(|_| normal.sample(rng)).collect(),
            b_visible: vec![0.0; visible],
            b_hidden: vec![0.0; hidden],
        }
    }

    /// `P(h = 1 | v)` for `n` visible rows.
    pub fn hidden_probs(&self, v: &[f64], n: usize) -> Vec<f64> {
        let mut h: Vec<f64> = self.b_hidden.iter().copied().cycle().take(n * self.hidden).collect();
        gemm(n, self.visible, self.hidden, 1.0, v, Op::Plain, &self.w, Op::Plain, 1.0, &mut h);
        h.iter_mut().for_each(|x| *x = sigmoid(*x));
        h
    }

    /// `P(v = 1 | h)` for `n` hidden rows.
    pub fn visible_probs(&self, h: &[f64], n: usize) -> Vec<f64> {
        let mut v: Vec<f64> = self.b_visible.iter().copied().cycle().take(n * self.visible).collect();
        gemm(n, self.hidden, self.visible, 1.0, h, Op::Plain, &self.w, Op::Trans, 1.0, &mut v);
        v.iter_mut().for_each(|x| *x = sigmoid(*x));
        v
    }

    /// Mean squared error of the deterministic up-down reconstruction.
    pub fn reconstruction_error(&self, v: &[f64], n: usize) -> f64 {
        let r = self.visible_probs(&self.hidden_probs(v, n), n);
        v.iter().zip(&r).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / v.len().max(1) as f64
    }

    /// One CD-1 update on a batch of `n` visible rows with values in [0, 1].
    /// Hidden states are sampled on the way up; the reconstruction and the
    /// negative phase use probabilities. Returns the batch reconstruction error.
    pub fn cd1(&mut self, v0: &[f64], n: usize, lr: f64, rng: &mut impl Rng) -> f64 {
        let (nv, nh) = (self.visible, self.hidden);
        let h0 = self.hidden_probs(v0, n);
        let h0_sample: Vec<f64> = h0
            .iter()
            .map(|&p| if rng.random::<f64>() < p { 1.0 } else { 0.0 })
            .collect();
        let v1 = self.visible_probs(&h0_sample, n);
        let h1 = self.hidden_probs(&v1, n);
        let err = v0.iter().zip(&v1).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / (n * nv) as f64;
        if lr == 0.0 {
            return err;
        }
        let scale = lr / n as f64;
        // W += lr/n · (v0ᵀ h0 − v1ᵀ h1)
        gemm(nv, n, nh, scale, v0, Op::Trans, &h0, Op::Plain, 1.0, &mut self.w);
        gemm(nv, n, nh, -scale, &v1, Op::Trans, &h1, Op::Plain, 1.0, &mut self.w);
        for r in 0..n {
            for j in 0..nv {
                self.b_visible[j] += scale * (v0[r * nv + j] - v1[r * nv + j]);
            }
            for j in 0..nh {
                self.b_hidden[j] += scale * (h0[r * nh + j] - h1[r * nh + j]);
            }
        }
        err
    }

    /// Minibatch CD-1 over `data` (rows of length `visible`) for `epochs`
    /// passes in a seeded shuffled order. Returns the mean error per epoch.
    pub fn train(&mut self, data: &[f64], epochs: usize, batch: usize, lr: f64, rng: &mut impl Rng) -> Vec<f64> {
        use rand::seq::SliceRandom;
        let n = data.len() / self.visible;
        let batch = batch.max(1);
        let mut order: Vec<usize> = (0..n).collect();
        let mut buf = Vec::with_capacity(batch * self.visible);
        (0..epochs)
            .map(|_| {
                order.shuffle(rng);
                let mut total = 0.0;
                for chunk in order.chunks(batch) {
                    buf.clear();
                    for &i in chunk {
                        buf.extend_from_slice(&data[i * self.visible..(i + 1) * self.visible]);
                    }
                    total += self.cd1(&buf, chunk.len(), lr, rng) * chunk.len() as f64;
                }
                total / n.max(1) as f64
            })
            .collect()
    }
}

/// MLP whose sigmoid hidden layers copy the RBM stack (weights transposed to
/// `hidden × visible`, hidden biases), followed by `extra` Glorot-initialized
/// hidden layers and an output layer of `out` units with small uniform weights.
pub fn mlp_from_rbms(
    rbms: &[Rbm],
    extra: &[(usize, Activation)],
    out: usize,
    head: Head,
    rng: &mut impl Rng,
) -> Result<Mlp> {
    let Some(first) = rbms.first() else {
        return Err(Error::Shape("empty RBM stack".into()));
    };
    if rbms.windows(2).any(|w| w[0].hidden != w[1].visible) {
        return Err(Error::Shape("RBM stack dimensions do not chain".into()));
    }
    let mut layers = Vec::new();
    let mut activations = Vec::new();
    for rbm in rbms {
        let mut d = Dense::zeros(rbm.visible, rbm.hidden);
        for i in 0..rbm.visible {
            for j in 0..rbm.hidden {
                d.weights[j * rbm.visible + i] = rbm.w[i * rbm.hidden + j];
            }
        }
        d.bias.copy_from_slice(&rbm.b_hidden);
        layers.push(d);
        activations.push(Activation::Sigmoid);
    }
    let mut width = rbms.last().map_or(first.visible, |r| r.hidden);
    for &(size, act) in extra {
        layers.push(Dense::glorot(width, size, rng));
        activations.push(act);
        width = size;
    }
    let mut head_layer = Dense::zeros(width, out);
    head_layer
        .weights
        .iter_mut()
        .for_each(|w| *w = rng.random_range(-0.05..0.05));
    layers.push(head_layer);
    Mlp::from_layers(layers, activations, head)
}

/// RBM stack followed directly by a single logistic output unit.
pub fn init_mlp_from_rbms(rbms: &[Rbm], rng: &mut impl Rng) -> Result<Mlp> {
    mlp_from_rbms(rbms, &[], 1, Head::Logistic, rng)
}
