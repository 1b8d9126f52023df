//! Fully connected layers, activations and the multilayer perceptron.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Tensor;
use crate::error::{Error, Result};
use crate::linalg::{gemm, Op};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Sigmoid,
    Linear,
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

impl Activation {
    pub fn apply(self, x: &mut [f64]) {
        match self {
            Activation::Relu => x.iter_mut().for_each(|v| *v = v.max(0.0)),
            Activation::Sigmoid => x.iter_mut().for_each(|v| *v = sigmoid(*v)),
            Activation::Linear => {}
        }
    }

    /// Multiplies `grad` by the derivative, expressed through the activation output.
    pub fn backprop(self, output: &[f64], grad: &mut [f64]) {
        match self {
            Activation::Relu => grad
                .iter_mut()
                .zip(output)
                .for_each(|(g, &y)| if y <= 0.0 { *g = 0.0 }),
            Activation::Sigmoid => grad.iter_mut().zip(output).for_each(|(g, &y)| *g *= y * (1.0 - y)),
            Activation::Linear => {}
        }
    }
}

/// Row-wise softmax of an `n × k` matrix.
pub fn softmax_rows(x: &mut [f64], k: usize) {
    for row in x.chunks_mut(k) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        row.iter_mut().for_each(|v| *v /= sum);
    }
}

/// Affine map `y = x Wᵀ + b` on a batch of rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub in_dim: usize,
    pub out_dim: usize,
    /// `out_dim × in_dim`, row-major.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Gradients of one [`Dense`] layer.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseGrad {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Self {
            in_dim,
            out_dim,
            weights: vec![0.0; in_dim * out_dim],
            bias: vec![0.0; out_dim],
        }
    }

    /// Uniform ±sqrt(6 / (fan_in + fan_out)) weights, zero bias.
    pub fn glorot(in_dim: usize, out_dim: usize, rng: &mut impl Rng) -> Self {
        let limit = (6.0 / (in_dim + out_dim) as f64).sqrt();
        Self {
            in_dim,
            out_dim,
            weights: (0..in_dim * out_dim).map(|_| rng.random_range(-limit..limit)).collect(),
            bias: vec![0.0; out_dim],
        }
    }

    /// `n × out_dim` outputs for `n × in_dim` inputs.
    pub fn forward(&self, x: &[f64], n: usize) -> Vec<f64> {
        let mut out: Vec<f64> = self.bias.iter().copied().cycle().take(n * self.out_dim).collect();
        gemm(n, self.in_dim, self.out_dim, 1.0, x, Op::Plain, &self.weights, Op::Trans, 1.0, &mut out);
        out
    }

    /// Parameter gradients and, if requested, the input gradient, from the
    /// output gradient `dy` (`n × out_dim`).
    pub fn backward(&self, x: &[f64], dy: &[f64], n: usize, want_dx: bool) -> (DenseGrad, Option<Vec<f64>>) {
        let mut dw = vec![0.0; self.weights.len()];
        gemm(self.out_dim, n, self.in_dim, 1.0, dy, Op::Trans, x, Op::Plain, 0.0, &mut dw);
        let mut db = vec![0.0; self.out_dim];
        for row in dy.chunks(self.out_dim) {
            for (b, g) in db.iter_mut().zip(row) {
                *b += g;
            }
        }
        let dx = want_dx.then(|| {
            let mut dx = vec![0.0; n * self.in_dim];
            gemm(n, self.out_dim, self.in_dim, 1.0, dy, Op::Plain, &self.weights, Op::Plain, 0.0, &mut dx);
            dx
        });
        (DenseGrad { weights: dw, bias: db }, dx)
    }
}

/// Output nonlinearity and matching loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Head {
    /// Independent sigmoids with binary cross-entropy.
    Logistic,
    /// Softmax with categorical cross-entropy.
    Softmax,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Loss {
    BinaryCrossEntropy,
    CategoricalCrossEntropy,
}

impl Head {
    pub fn loss(self) -> Loss {
        match self {
            Head::Logistic => Loss::BinaryCrossEntropy,
            Head::Softmax => Loss::CategoricalCrossEntropy,
        }
    }
}

/// Dense layers with per-layer activations; the last layer is linear and
/// feeds the head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Dense>,
    /// Activation of each hidden layer (one fewer than `layers`).
    pub activations: Vec<Activation>,
    pub head: Head,
}

/// Gradients for every layer of an [`Mlp`].
#[derive(Debug, Clone, PartialEq)]
pub struct MlpGrad {
    pub layers: Vec<DenseGrad>,
}

impl MlpGrad {
    pub fn slices(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|g| [g.weights.as_slice(), g.bias.as_slice()])
            .collect()
    }
}

impl Mlp {
    /// Glorot-initialized network with dims `[in, hidden…, out]`.
    pub fn new(dims: &[usize], hidden: &[Activation], head: Head, rng: &mut impl Rng) -> Result<Self> {
        if dims.len() < 2 || hidden.len() != dims.len() - 2 {
            return Err(Error::Shape(format!(
                "{} dims need {} hidden activations, got {}",
                dims.len(),
                dims.len().saturating_sub(2),
                hidden.len()
            )));
        }
        let layers = dims.windows(2).map(|w| Dense::glorot(w[0], w[1], rng)).collect();
        Self::from_layers(layers, hidden.to_vec(), head)
    }

    pub fn from_layers(layers: Vec<Dense>, activations: Vec<Activation>, head: Head) -> Result<Self> {
        if layers.is_empty() || activations.len() + 1 != layers.len() {
            return Err(Error::Shape("need one activation per hidden layer".into()));
        }
        if layers.windows(2).any(|w| w[0].out_dim != w[1].in_dim) {
            return Err(Error::Shape("layer dimensions do not chain".into()));
        }
        Ok(Self {
            layers,
            activations,
            head,
        })
    }

    /// `[in, hidden…, out]`.
    pub fn dims(&self) -> Vec<usize> {
        std::iter::once(self.layers[0].in_dim)
            .chain(self.layers.iter().map(|l| l.out_dim))
            .collect()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.out_dim)
    }

    /// Outputs of every layer for a batch `x` of shape `[n, in]`: hidden
    /// activations in order, then the head's probabilities.
    pub fn forward(&self, x: &Tensor) -> Result<Vec<Tensor>> {
        let n = self.check_input(x)?;
        let mut outs: Vec<Tensor> = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate() {
            let input = if i == 0 { x.data() } else { outs[i - 1].data() };
            let mut y = layer.forward(input, n);
            match self.activations.get(i) {
                Some(act) => act.apply(&mut y),
                None => self.apply_head(&mut y),
            }
            outs.push(Tensor::new(vec![n, layer.out_dim], y)?);
        }
        Ok(outs)
    }

    /// Head probabilities only.
    pub fn predict(&self, x: &Tensor) -> Result<Tensor> {
        Ok(self.forward(x)?.pop().expect("at least one layer"))
    }

    fn apply_head(&self, y: &mut [f64]) {
        match self.head {
            Head::Logistic => Activation::Sigmoid.apply(y),
            Head::Softmax => softmax_rows(y, self.output_dim()),
        }
    }

    fn check_input(&self, x: &Tensor) -> Result<usize> {
        if x.shape().len() != 2 || x.shape()[1] != self.input_dim() {
            return Err(Error::Shape(format!(
                "network expects [n, {}], got {:?}",
                self.input_dim(),
                x.shape()
            )));
        }
        Ok(x.shape()[0])
    }

    /// Mean loss over the batch and its gradients, both multiplied by `scale`.
    ///
    /// `y` holds targets in the head's layout (0/1 per output for logistic,
    /// one-hot rows for softmax). `loss` must be the head's loss.
    pub fn backprop(&self, x: &Tensor, y: &Tensor, loss: Loss, scale: f64) -> Result<(f64, MlpGrad)> {
        if loss != self.head.loss() {
            return Err(Error::Config(format!("{loss:?} does not match a {:?} head", self.head)));
        }
        let n = self.check_input(x)?;
        if y.shape() != [n, self.output_dim()] {
            return Err(Error::Shape(format!(
                "targets must be [{n}, {}], got {:?}",
                self.output_dim(),
                y.shape()
            )));
        }
        let outs = self.forward(x)?;
        let probs = outs.last().expect("at least one layer").data();
        let value = scale * batch_loss(self.head, probs, y.data(), n);
        // softmax/logistic + matching cross-entropy: dL/dz = (p − y) / n
        let mut delta: Vec<f64> = probs
            .iter()
            .zip(y.data())
            .map(|(p, t)| scale * (p - t) / n as f64)
            .collect();
        let mut grads = Vec::with_capacity(self.layers.len());
        for i in (0..self.layers.len()).rev() {
            let input = if i == 0 { x.data() } else { outs[i - 1].data() };
            let (g, dx) = self.layers[i].backward(input, &delta, n, i > 0);
            grads.push(g);
            if let Some(mut dx) = dx {
                self.activations[i - 1].backprop(outs[i - 1].data(), &mut dx);
                delta = dx;
            }
        }
        grads.reverse();
        Ok((value, MlpGrad { layers: grads }))
    }

    /// Mean loss on a batch.
    pub fn loss(&self, x: &Tensor, y: &Tensor) -> Result<f64> {
        let n = self.check_input(x)?;
        let p = self.predict(x)?;
        Ok(batch_loss(self.head, p.data(), y.data(), n))
    }

    /// Weight and bias vectors in layer order, matching [`MlpGrad::slices`].
    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weights.as_mut_slice(), l.bias.as_mut_slice()])
            .collect()
    }

    pub fn param_sizes(&self) -> Vec<usize> {
        self.layers.iter().flat_map(|l| [l.weights.len(), l.bias.len()]).collect()
    }
}

/// Mean cross-entropy; probabilities are clamped away from 0 and 1.
fn batch_loss(head: Head, probs: &[f64], targets: &[f64], n: usize) -> f64 {
    const EPS: f64 = 1e-15;
    let total: f64 = match head {
        Head::Logistic => probs
            .iter()
            .zip(targets)
            .map(|(&p, &t)| {
                let p = p.clamp(EPS, 1.0 - EPS);
                -(t * p.ln() + (1.0 - t) * (1.0 - p).ln())
            })
            .sum(),
        Head::Softmax => probs
            .iter()
            .zip(targets)
            .filter(|(_, &t)| t != 0.0)
            .map(|(&p, &t)| -t * p.max(EPS).ln())
            .sum(),
    };
    total / n as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::gradcheck::{check_gradients, GRAD_TOL};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_net_with_logistic_head_outputs_half() {
        let net = Mlp::from_layers(vec![Dense::zeros(4, 3), Dense::zeros(3, 1)], vec![Activation::Relu], Head::Logistic)
            .unwrap();
        let out = net.predict(&Tensor::new(vec![2, 4], vec![1.0; 8]).unwrap()).unwrap();
        assert_eq!(out.data(), &[0.5, 0.5]);
    }

    #[test]
    fn identity_linear_layer_passes_input_through() {
        let mut d = Dense::zeros(3, 3);
        for i in 0..3 {
            d.weights[i * 3 + i] = 1.0;
        }
        let x = [0.3, -1.2, 2.5, 1.0, 0.0, -4.0];
        assert_eq!(d.forward(&x, 2), x.to_vec());
    }

    #[test]
    fn softmax_rows_sum_to_one_and_ignore_shifts() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = Mlp::new(&[5, 7, 4], &[Activation::Sigmoid], Head::Softmax, &mut rng).unwrap();
        let x = Tensor::new(vec![3, 5], (0..15).map(|i| (i as f64).sin() * 3.0).collect()).unwrap();
        let p = net.predict(&x).unwrap();
        for row in p.data().chunks(4) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert!(row.iter().all(|&v| v > 0.0));
        }
        let mut a = vec![1.0, 2.0, 3.0];
        let mut b = vec![1001.0, 1002.0, 1003.0];
        softmax_rows(&mut a, 3);
        softmax_rows(&mut b, 3);
        assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-9));
    }

    #[test]
    fn gradients_match_finite_differences() {
        for (head, out) in [(Head::Logistic, 1usize), (Head::Logistic, 3), (Head::Softmax, 4)] {
            let mut rng = ChaCha8Rng::seed_from_u64(out as u64 + 10);
            let mut net = Mlp::new(
                &[6, 5, 4, out],
                &[Activation::Sigmoid, Activation::Relu],
                head,
                &mut rng,
            )
            .unwrap();
            let x = Tensor::new(vec![3, 6], (0..18).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
            let mut y = vec![0.0; 3 * out];
            for r in 0..3 {
                match head {
                    Head::Logistic => (0..out).for_each(|k| y[r * out + k] = ((r + k) % 2) as f64),
                    Head::Softmax => y[r * out + (r % out)] = 1.0,
                }
            }
            let y = Tensor::new(vec![3, out], y).unwrap();
            let (_, grad) = net.backprop(&x, &y, head.loss(), 1.0).unwrap();
            let analytic: Vec<Vec<f64>> = grad.slices().iter().map(|s| s.to_vec()).collect();
            let worst = check_gradients(
                &mut net,
                |n| n.params_mut(),
                |n| n.loss(&x, &y).unwrap(),
                &analytic,
            );
            assert!(worst < GRAD_TOL, "{head:?}/{out}: {worst}");
        }
    }

    #[test]
    fn scaling_the_loss_scales_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = Mlp::new(&[3, 4, 1], &[Activation::Relu], Head::Logistic, &mut rng).unwrap();
        let x = Tensor::new(vec![2, 3], vec![0.1, -0.4, 0.9, 1.2, 0.3, -0.7]).unwrap();
        let y = Tensor::new(vec![2, 1], vec![1.0, 0.0]).unwrap();
        let (l1, g1) = net.backprop(&x, &y, Loss::BinaryCrossEntropy, 1.0).unwrap();
        let (l2, g2) = net.backprop(&x, &y, Loss::BinaryCrossEntropy, 2.0).unwrap();
        assert!((l2 - 2.0 * l1).abs() < 1e-12);
        for (a, b) in g1.slices().iter().zip(g2.slices()) {
            assert!(a.iter().zip(b.iter()).all(|(a, b)| (2.0 * a - b).abs() < 1e-12));
        }
    }

    #[test]
    fn saturated_correct_prediction_has_tiny_gradients() {
        let mut out = Dense::zeros(2, 1);
        out.bias[0] = 40.0;
        let net = Mlp::from_layers(vec![Dense::zeros(2, 2), out], vec![Activation::Relu], Head::Logistic).unwrap();
        let x = Tensor::new(vec![1, 2], vec![0.5, 0.5]).unwrap();
        let y = Tensor::new(vec![1, 1], vec![1.0]).unwrap();
        let (_, g) = net.backprop(&x, &y, Loss::BinaryCrossEntropy, 1.0).unwrap();
        assert!(g.slices().iter().flat_map(|s| s.iter()).all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn mismatched_loss_or_shape_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = Mlp::new(&[3, 1], &[], Head::Logistic, &mut rng).unwrap();
        let x = Tensor::zeros(vec![2, 3]);
        let y = Tensor::zeros(vec![2, 1]);
        assert!(net.backprop(&x, &y, Loss::CategoricalCrossEntropy, 1.0).is_err());
        assert!(net.forward(&Tensor::zeros(vec![2, 4])).is_err());
    }
}
