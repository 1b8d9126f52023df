//! Sequential convolutional networks: 3×3 same-padded convolution, ReLU,
//! sigmoid, 2×2 max-pooling, flattening and dense layers, trained with a
//! softmax cross-entropy head.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::dense::{sigmoid, softmax_rows, Dense};
use super::Tensor;
use crate::error::{Error, Result};
use crate::linalg::{gemm, Op};

/// 3×3 convolution with one pixel of zero padding (output keeps the input size).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conv2d {
    pub in_ch: usize,
    pub out_ch: usize,
    /// `out_ch × (in_ch · 9)`, row-major, kernel taps in (channel, ky, kx) order.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Conv2d {
    /// Uniform ±sqrt(6 / (fan_in + fan_out)) with 3×3 receptive fields.
    pub fn glorot(in_ch: usize, out_ch: usize, rng: &mut impl Rng) -> Self {
        let limit = (6.0 / (9 * (in_ch + out_ch)) as f64).sqrt();
        Self {
            in_ch,
            out_ch,
            weights: (0..out_ch * in_ch * 9).map(|_| rng.random_range(-limit..limit)).collect(),
            bias: vec![0.0; out_ch],
        }
    }

    fn im2col(&self, x: &[f64], h: usize, w: usize, cols: &mut [f64]) {
        let hw = h * w;
        for c in 0..self.in_ch {
            let plane = &x[c * hw..(c + 1) * hw];
            for ky in 0..3 {
                for kx in 0..3 {
                    let row = &mut cols[(c * 9 + ky * 3 + kx) * hw..][..hw];
                    for y in 0..h {
                        let sy = y as isize + ky as isize - 1;
                        let dst = &mut row[y * w..(y + 1) * w];
                        if sy < 0 || sy >= h as isize {
                            dst.iter_mut().for_each(|v| *v = 0.0);
                            continue;
                        }
                        let src = &plane[sy as usize * w..(sy as usize + 1) * w];
                        for (xx, d) in dst.iter_mut().enumerate() {
                            let sx = xx as isize + kx as isize - 1;
                            *d = if sx < 0 || sx >= w as isize { 0.0 } else { src[sx as usize] };
                        }
                    }
                }
            }
        }
    }

    fn col2im(&self, cols: &[f64], h: usize, w: usize, dx: &mut [f64]) {
        let hw = h * w;
        for c in 0..self.in_ch {
            let plane = &mut dx[c * hw..(c + 1) * hw];
            for ky in 0..3 {
                for kx in 0..3 {
                    let row = &cols[(c * 9 + ky * 3 + kx) * hw..][..hw];
                    for y in 0..h {
                        let sy = y as isize + ky as isize - 1;
                        if sy < 0 || sy >= h as isize {
                            continue;
                        }
                        for xx in 0..w {
                            let sx = xx as isize + kx as isize - 1;
                            if sx >= 0 && sx < w as isize {
                                plane[sy as usize * w + sx as usize] += row[y * w + xx];
                            }
                        }
                    }
                }
            }
        }
    }

    fn forward(&self, x: &[f64], n: usize, h: usize, w: usize) -> Vec<f64> {
        if h * w >= DIRECT_MIN_AREA {
            self.forward_direct(x, n, h, w)
        } else {
            self.forward_gemm(x, n, h, w)
        }
    }

    fn backward(
        &self,
        x: &[f64],
        dy: &[f64],
        n: usize,
        h: usize,
        w: usize,
        want_dx: bool,
    ) -> (Vec<f64>, Vec<f64>, Option<Vec<f64>>) {
        if h * w >= DIRECT_MIN_AREA {
            self.backward_direct(x, dy, n, h, w, want_dx)
        } else {
            self.backward_gemm(x, dy, n, h, w, want_dx)
        }
    }

    fn forward_gemm(&self, x: &[f64], n: usize, h: usize, w: usize) -> Vec<f64> {
        let hw = h * w;
        let k = self.in_ch * 9;
        let mut cols = vec![0.0; k * hw];
        let mut out = vec![0.0; n * self.out_ch * hw];
        for s in 0..n {
            self.im2col(&x[s * self.in_ch * hw..(s + 1) * self.in_ch * hw], h, w, &mut cols);
            let o = &mut out[s * self.out_ch * hw..(s + 1) * self.out_ch * hw];
            for (c, b) in self.bias.iter().enumerate() {
                o[c * hw..(c + 1) * hw].iter_mut().for_each(|v| *v = *b);
            }
            gemm(self.out_ch, k, hw, 1.0, &self.weights, Op::Plain, &cols, Op::Plain, 1.0, o);
        }
        out
    }

    fn backward_gemm(
        &self,
        x: &[f64],
        dy: &[f64],
        n: usize,
        h: usize,
        w: usize,
        want_dx: bool,
    ) -> (Vec<f64>, Vec<f64>, Option<Vec<f64>>) {
        let hw = h * w;
        let k = self.in_ch * 9;
        let mut cols = vec![0.0; k * hw];
        let mut dcols = vec![0.0; k * hw];
        let mut dw = vec![0.0; self.weights.len()];
        let mut db = vec![0.0; self.out_ch];
        let mut dx = want_dx.then(|| vec![0.0; n * self.in_ch * hw]);
        for s in 0..n {
            self.im2col(&x[s * self.in_ch * hw..(s + 1) * self.in_ch * hw], h, w, &mut cols);
            let g = &dy[s * self.out_ch * hw..(s + 1) * self.out_ch * hw];
            gemm(self.out_ch, hw, k, 1.0, g, Op::Plain, &cols, Op::Trans, 1.0, &mut dw);
            for (c, b) in db.iter_mut().enumerate() {
                *b += g[c * hw..(c + 1) * hw].iter().sum::<f64>();
            }
            if let Some(dx) = dx.as_mut() {
                gemm(k, self.out_ch, hw, 1.0, &self.weights, Op::Trans, g, Op::Plain, 0.0, &mut dcols);
                self.col2im(&dcols, h, w, &mut dx[s * self.in_ch * hw..(s + 1) * self.in_ch * hw]);
            }
        }
        (dw, db, dx)
    }
}

impl Conv2d {
    /// Tap-by-tap convolution: every (output, input, tap) triple is a
    /// shifted row-wise multiply-add.
    fn forward_direct(&self, x: &[f64], n: usize, h: usize, w: usize) -> Vec<f64> {
        let hw = h * w;
        let mut out = vec![0.0; n * self.out_ch * hw];
        for s in 0..n {
            let xs = &x[s * self.in_ch * hw..(s + 1) * self.in_ch * hw];
            for o in 0..self.out_ch {
                let op = &mut out[(s * self.out_ch + o) * hw..][..hw];
                op.iter_mut().for_each(|v| *v = self.bias[o]);
                for c in 0..self.in_ch {
                    let ip = &xs[c * hw..(c + 1) * hw];
                    let taps = &self.weights[(o * self.in_ch + c) * 9..][..9];
                    for_each_tap(h, w, |t, dst, src, len| {
                        let wv = taps[t];
                        for (a, b) in op[dst..dst + len].iter_mut().zip(&ip[src..src + len]) {
                            *a += wv * b;
                        }
                    });
                }
            }
        }
        out
    }

    fn backward_direct(
        &self,
        x: &[f64],
        dy: &[f64],
        n: usize,
        h: usize,
        w: usize,
        want_dx: bool,
    ) -> (Vec<f64>, Vec<f64>, Option<Vec<f64>>) {
        let hw = h * w;
        let mut dw = vec![0.0; self.weights.len()];
        let mut db = vec![0.0; self.out_ch];
        let mut dx = want_dx.then(|| vec![0.0; n * self.in_ch * hw]);
        for s in 0..n {
            let xs = &x[s * self.in_ch * hw..(s + 1) * self.in_ch * hw];
            for o in 0..self.out_ch {
                let g = &dy[(s * self.out_ch + o) * hw..][..hw];
                db[o] += g.iter().sum::<f64>();
                for c in 0..self.in_ch {
                    let ip = &xs[c * hw..(c + 1) * hw];
                    let base = (o * self.in_ch + c) * 9;
                    for_each_tap(h, w, |t, dst, src, len| {
                        dw[base + t] += dot(&g[dst..dst + len], &ip[src..src + len]);
                    });
                    if let Some(dx) = dx.as_mut() {
                        let dp = &mut dx[(s * self.in_ch + c) * hw..][..hw];
                        let taps = &self.weights[base..base + 9];
                        for_each_tap(h, w, |t, dst, src, len| {
                            let wv = taps[t];
                            for (a, b) in dp[src..src + len].iter_mut().zip(&g[dst..dst + len]) {
                                *a += wv * b;
                            }
                        });
                    }
                }
            }
        }
        (dw, db, dx)
    }
}

/// Planes at least this large use the direct path; smaller ones go through
/// im2col and a matrix product.
const DIRECT_MIN_AREA: usize = 1024;

/// Calls `f(tap, out_offset, in_offset, len)` for every contiguous run of
/// output samples that a 3×3 tap reads from inside the plane.
fn for_each_tap(h: usize, w: usize, mut f: impl FnMut(usize, usize, usize, usize)) {
    // (first output index, first input index, count) along one axis
    let span = |k: usize, n: usize| match k {
        0 => (1, 0, n.saturating_sub(1)),
        1 => (0, 0, n),
        _ => (0, 1, n.saturating_sub(1)),
    };
    for ky in 0..3 {
        let (oy, iy, ny) = span(ky, h);
        for kx in 0..3 {
            let (ox, ix, nx) = span(kx, w);
            for r in 0..ny {
                f(ky * 3 + kx, (oy + r) * w + ox, (iy + r) * w + ix, nx);
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (p, q) in ca.zip(cb) {
        for i in 0..4 {
            acc[i] += p[i] * q[i];
        }
    }
    acc[0] + acc[1] + acc[2] + acc[3] + tail
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Layer {
    Conv2d(Conv2d),
    Relu,
    Sigmoid,
    /// 2×2 max-pooling with stride 2; odd trailing rows/columns are dropped
    /// and a dimension of size 1 passes through unpooled.
    MaxPool2,
    Flatten,
    Dense(Dense),
}

fn pooled(d: usize) -> usize {
    if d == 1 {
        1
    } else {
        d / 2
    }
}

impl Layer {
    /// Per-sample output shape for a per-sample input shape.
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        let bad = |what: &str| Error::Shape(format!("{what} cannot take input {input:?}"));
        match self {
            Layer::Conv2d(c) => match input {
                [ch, h, w] if *ch == c.in_ch => Ok(vec![c.out_ch, *h, *w]),
                _ => Err(bad("conv")),
            },
            Layer::Relu | Layer::Sigmoid => Ok(input.to_vec()),
            Layer::MaxPool2 => match input {
                [c, h, w] if *h >= 1 && *w >= 1 => Ok(vec![*c, pooled(*h), pooled(*w)]),
                _ => Err(bad("max-pool")),
            },
            Layer::Flatten => Ok(vec![input.iter().product()]),
            Layer::Dense(d) => match input {
                [n] if *n == d.in_dim => Ok(vec![d.out_dim]),
                _ => Err(bad("dense")),
            },
        }
    }

    fn has_params(&self) -> bool {
        matches!(self, Layer::Conv2d(_) | Layer::Dense(_))
    }
}

/// Activations recorded during a training forward pass.
pub struct Trace {
    /// `values[0]` is the input, `values[i + 1]` the output of layer `i`.
    pub values: Vec<Tensor>,
    /// Flat argmax indices for each max-pool layer output.
    pool_index: Vec<Option<Vec<usize>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sequential {
    /// Per-sample input shape, e.g. `[channels, height, width]`.
    pub input_shape: Vec<usize>,
    pub layers: Vec<Layer>,
}

impl Sequential {
    pub fn new(input_shape: Vec<usize>, layers: Vec<Layer>) -> Result<Self> {
        let net = Self { input_shape, layers };
        net.shapes()?;
        Ok(net)
    }

    /// Per-sample shapes: input followed by each layer's output.
    pub fn shapes(&self) -> Result<Vec<Vec<usize>>> {
        let mut shapes = vec![self.input_shape.clone()];
        for layer in &self.layers {
            let next = layer.output_shape(shapes.last().expect("non-empty"))?;
            shapes.push(next);
        }
        Ok(shapes)
    }

    pub fn output_dim(&self) -> usize {
        self.shapes()
            .ok()
            .and_then(|s| s.last().map(|l| l.iter().product()))
            .unwrap_or(0)
    }

    fn check_batch(&self, x: &Tensor) -> Result<usize> {
        if x.shape().len() != self.input_shape.len() + 1 || x.shape()[1..] != self.input_shape[..] {
            return Err(Error::Shape(format!(
                "network expects [n, {:?}], got {:?}",
                self.input_shape,
                x.shape()
            )));
        }
        Ok(x.shape()[0])
    }

    pub fn forward_trace(&self, x: &Tensor) -> Result<Trace> {
        let n = self.check_batch(x)?;
        let shapes = self.shapes()?;
        let mut values = vec![x.clone()];
        let mut pool_index = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate() {
            let input = values[i].data();
            let ins = &shapes[i];
            let mut idx = None;
            let out = match layer {
                Layer::Conv2d(c) => c.forward(input, n, ins[1], ins[2]),
                Layer::Relu => input.iter().map(|v| v.max(0.0)).collect(),
                Layer::Sigmoid => input.iter().map(|&v| sigmoid(v)).collect(),
                Layer::MaxPool2 => {
                    let (out, arg) = max_pool(input, n, ins[0], ins[1], ins[2]);
                    idx = Some(arg);
                    out
                }
                Layer::Flatten => input.to_vec(),
                Layer::Dense(d) => d.forward(input, n),
            };
            let mut shape = vec![n];
            shape.extend_from_slice(&shapes[i + 1]);
            values.push(Tensor::new(shape, out)?);
            pool_index.push(idx);
        }
        Ok(Trace { values, pool_index })
    }

    /// Raw outputs (logits) of the last layer.
    pub fn logits(&self, x: &Tensor) -> Result<Tensor> {
        Ok(self.forward_trace(x)?.values.pop().expect("input present"))
    }

    /// Softmax probabilities, `[n, k]`.
    pub fn predict_proba(&self, x: &Tensor) -> Result<Tensor> {
        let logits = self.logits(x)?;
        let k = logits.row_len();
        let n = logits.rows();
        let mut p = logits.into_data();
        softmax_rows(&mut p, k);
        Tensor::new(vec![n, k], p)
    }

    /// Mean categorical cross-entropy of softmax(logits) against `labels`.
    pub fn loss(&self, x: &Tensor, labels: &[usize]) -> Result<f64> {
        let p = self.predict_proba(x)?;
        Ok(cross_entropy(p.data(), p.row_len(), labels))
    }

    /// Mean loss and parameter gradients (layer order, weights then bias).
    pub fn loss_and_grad(&self, x: &Tensor, labels: &[usize]) -> Result<(f64, Vec<Vec<f64>>)> {
        let (loss, grads, _) = self.backprop(x, labels, false)?;
        Ok((loss, grads))
    }

    /// As [`Sequential::loss_and_grad`], also returning the input gradient.
    pub fn backprop(&self, x: &Tensor, labels: &[usize], want_input_grad: bool) -> Result<(f64, Vec<Vec<f64>>, Option<Vec<f64>>)> {
        let (loss, grads, input_grad, _) = self.backprop_inner(x, labels, want_input_grad)?;
        Ok((loss, grads, input_grad))
    }

    /// Loss, parameter gradients and the softmax probabilities of the batch.
    pub fn train_pass(&self, x: &Tensor, labels: &[usize]) -> Result<(f64, Vec<Vec<f64>>, Tensor)> {
        let (loss, grads, _, p) = self.backprop_inner(x, labels, false)?;
        Ok((loss, grads, p))
    }

    #[allow(clippy::type_complexity)]
    fn backprop_inner(
        &self,
        x: &Tensor,
        labels: &[usize],
        want_input_grad: bool,
    ) -> Result<(f64, Vec<Vec<f64>>, Option<Vec<f64>>, Tensor)> {
        let n = self.check_batch(x)?;
        if labels.len() != n {
            return Err(Error::Shape(format!("{n} samples but {} labels", labels.len())));
        }
        let trace = self.forward_trace(x)?;
        let shapes = self.shapes()?;
        let logits = trace.values.last().expect("input present");
        let k = logits.row_len();
        if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
            return Err(Error::Shape(format!("label {bad} out of range for {k} classes")));
        }
        let mut p = logits.data().to_vec();
        softmax_rows(&mut p, k);
        let loss = cross_entropy(&p, k, labels);
        let proba = Tensor::new(vec![n, k], p.clone())?;
        let mut delta = p;
        for (r, &l) in labels.iter().enumerate() {
            delta[r * k + l] -= 1.0;
        }
        delta.iter_mut().for_each(|d| *d /= n as f64);

        let mut grads: Vec<Vec<f64>> = Vec::new();
        for i in (0..self.layers.len()).rev() {
            let input = trace.values[i].data();
            let output = trace.values[i + 1].data();
            let ins = &shapes[i];
            let need_dx = i > 0 || want_input_grad;
            match &self.layers[i] {
                Layer::Conv2d(c) => {
                    let (dw, db, dx) = c.backward(input, &delta, n, ins[1], ins[2], need_dx);
                    grads.push(db);
                    grads.push(dw);
                    if let Some(dx) = dx {
                        delta = dx;
                    }
                }
                Layer::Dense(d) => {
                    let (g, dx) = d.backward(input, &delta, n, need_dx);
                    grads.push(g.bias);
                    grads.push(g.weights);
                    if let Some(dx) = dx {
                        delta = dx;
                    }
                }
                Layer::Relu => delta.iter_mut().zip(output).for_each(|(g, &y)| {
                    if y <= 0.0 {
                        *g = 0.0
                    }
                }),
                Layer::Sigmoid => delta.iter_mut().zip(output).for_each(|(g, &y)| *g *= y * (1.0 - y)),
                Layer::MaxPool2 => {
                    let idx = trace.pool_index[i].as_ref().expect("pool indices recorded");
                    let mut dx = vec![0.0; input.len()];
                    for (g, &j) in delta.iter().zip(idx) {
                        dx[j] += g;
                    }
                    delta = dx;
                }
                Layer::Flatten => {}
            }
        }
        grads.reverse();
        let input_grad = want_input_grad.then_some(delta);
        Ok((loss, grads, input_grad, proba))
    }

    /// Weights and biases of every parameterized layer, in the gradient order.
    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        for layer in &mut self.layers {
            match layer {
                Layer::Conv2d(c) => {
                    out.push(&mut c.weights);
                    out.push(&mut c.bias);
                }
                Layer::Dense(d) => {
                    out.push(&mut d.weights);
                    out.push(&mut d.bias);
                }
                _ => {}
            }
        }
        out
    }

    pub fn param_sizes(&self) -> Vec<usize> {
        self.layers
            .iter()
            .filter(|l| l.has_params())
            .flat_map(|l| match l {
                Layer::Conv2d(c) => [c.weights.len(), c.bias.len()],
                Layer::Dense(d) => [d.weights.len(), d.bias.len()],
                _ => unreachable!(),
            })
            .collect()
    }

    pub fn n_params(&self) -> usize {
        self.param_sizes().iter().sum()
    }
}

fn cross_entropy(p: &[f64], k: usize, labels: &[usize]) -> f64 {
    labels
        .iter()
        .enumerate()
        .map(|(r, &l)| -p[r * k + l].max(1e-300).ln())
        .sum::<f64>()
        / labels.len().max(1) as f64
}

/// 2×2 max-pool forward; returns outputs and flat argmax input indices.
fn max_pool(x: &[f64], n: usize, c: usize, h: usize, w: usize) -> (Vec<f64>, Vec<usize>) {
    let (oh, ow) = (pooled(h), pooled(w));
    let (sh, sw) = (if h == 1 { 1 } else { 2 }, if w == 1 { 1 } else { 2 });
    let mut out = Vec::with_capacity(n * c * oh * ow);
    let mut arg = Vec::with_capacity(n * c * oh * ow);
    for plane in 0..n * c {
        let base = plane * h * w;
        for y in 0..oh {
            for xx in 0..ow {
                let mut best = base + y * sh * w + xx * sw;
                for dy in 0..sh {
                    for dx in 0..sw {
                        let j = base + (y * sh + dy) * w + xx * sw + dx;
                        if x[j] > x[best] {
                            best = j;
                        }
                    }
                }
                out.push(x[best]);
                arg.push(best);
            }
        }
    }
    (out, arg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::gradcheck::{check_gradients, check_input_gradient, GRAD_TOL};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_tensor(shape: Vec<usize>, rng: &mut impl Rng) -> Tensor {
        let n = shape.iter().product();
        Tensor::new(shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn direct_and_matrix_convolution_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for (n, ci, co, h, w) in [(2, 1, 3, 33, 40), (1, 3, 2, 5, 1), (2, 2, 4, 1, 7), (1, 2, 2, 9, 9)] {
            let mut conv = Conv2d::glorot(ci, co, &mut rng);
            conv.bias.iter_mut().for_each(|b| *b = rng.random_range(-0.5..0.5));
            let x: Vec<f64> = (0..n * ci * h * w).map(|_| rng.random_range(-1.0..1.0)).collect();
            let dy: Vec<f64> = (0..n * co * h * w).map(|_| rng.random_range(-1.0..1.0)).collect();
            let close = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(p, q)| (p - q).abs() <= 1e-12 * (1.0 + p.abs()));
            assert!(close(&conv.forward_direct(&x, n, h, w), &conv.forward_gemm(&x, n, h, w)));
            let (dw1, db1, dx1) = conv.backward_direct(&x, &dy, n, h, w, true);
            let (dw2, db2, dx2) = conv.backward_gemm(&x, &dy, n, h, w, true);
            assert!(close(&dw1, &dw2) && close(&db1, &db2) && close(&dx1.unwrap(), &dx2.unwrap()));
        }
    }

    fn check(net: &mut Sequential, x: &Tensor, labels: &[usize]) -> f64 {
        let (_, grads) = net.loss_and_grad(x, labels).unwrap();
        check_gradients(net, |n| n.params_mut(), |n| n.loss(x, labels).unwrap(), &grads)
    }

    #[test]
    fn conv_relu_pool_dense_gradients() {
        for seed in 0..3 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut net = Sequential::new(
                vec![2, 6, 5],
                vec![
                    Layer::Conv2d(Conv2d::glorot(2, 3, &mut rng)),
                    Layer::Relu,
                    Layer::MaxPool2,
                    Layer::Conv2d(Conv2d::glorot(3, 2, &mut rng)),
                    Layer::Sigmoid,
                    Layer::Flatten,
                    Layer::Dense(Dense::glorot(12, 3, &mut rng)),
                ],
            )
            .unwrap();
            let x = random_tensor(vec![2, 2, 6, 5], &mut rng);
            let worst = check(&mut net, &x, &[0, 2]);
            assert!(worst < GRAD_TOL, "seed {seed}: {worst}");
        }
    }

    #[test]
    fn input_gradient_matches() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let net = Sequential::new(
            vec![1, 4, 4],
            vec![
                Layer::Conv2d(Conv2d::glorot(1, 2, &mut rng)),
                Layer::MaxPool2,
                Layer::Flatten,
                Layer::Dense(Dense::glorot(8, 2, &mut rng)),
            ],
        )
        .unwrap();
        let x = random_tensor(vec![1, 1, 4, 4], &mut rng);
        let (_, _, dx) = net.backprop(&x, &[1], true).unwrap();
        let mut data = x.data().to_vec();
        let worst = check_input_gradient(
            &mut data,
            |d| net.loss(&Tensor::new(vec![1, 1, 4, 4], d.to_vec()).unwrap(), &[1]).unwrap(),
            &dx.unwrap(),
        );
        assert!(worst < GRAD_TOL, "{worst}");
    }

    #[test]
    fn max_pool_routes_gradient_to_argmax_only() {
        let x: Vec<f64> = (0..16).map(|i| ((i * 7) % 16) as f64).collect();
        let (out, arg) = max_pool(&x, 1, 1, 4, 4);
        // brute force: each 2×2 block
        for (o, (by, bx)) in [(0, 0), (0, 1), (1, 0), (1, 1)].iter().enumerate() {
            let block: Vec<usize> = (0..2)
                .flat_map(|dy| (0..2).map(move |dx| (by * 2 + dy) * 4 + bx * 2 + dx))
                .collect();
            let best = *block.iter().max_by(|&&a, &&b| x[a].total_cmp(&x[b])).unwrap();
            assert_eq!(arg[o], best);
            assert_eq!(out[o], x[best]);
        }
        let net = Sequential::new(vec![1, 4, 4], vec![Layer::MaxPool2, Layer::Flatten]).unwrap();
        let t = Tensor::new(vec![1, 1, 4, 4], x.clone()).unwrap();
        let (_, _, dx) = net.backprop(&t, &[0], true).unwrap();
        let dx = dx.unwrap();
        for (j, g) in dx.iter().enumerate() {
            if !arg.contains(&j) {
                assert_eq!(*g, 0.0);
            }
        }
    }

    #[test]
    fn size_one_dimensions_pass_through_pooling() {
        let shape = Layer::MaxPool2.output_shape(&[3, 1, 5]).unwrap();
        assert_eq!(shape, vec![3, 1, 2]);
        let shape = Layer::MaxPool2.output_shape(&[3, 1, 1]).unwrap();
        assert_eq!(shape, vec![3, 1, 1]);
    }

    #[test]
    fn probabilities_are_normalized() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let net = Sequential::new(
            vec![1, 4, 4],
            vec![Layer::Conv2d(Conv2d::glorot(1, 2, &mut rng)), Layer::Flatten, Layer::Dense(Dense::glorot(32, 5, &mut rng))],
        )
        .unwrap();
        let p = net.predict_proba(&random_tensor(vec![3, 1, 4, 4], &mut rng)).unwrap();
        for row in p.data().chunks(5) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(row.iter().all(|&v| v > 0.0));
        }
    }

    #[test]
    fn shape_errors_are_reported() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        assert!(Sequential::new(vec![2, 4, 4], vec![Layer::Conv2d(Conv2d::glorot(1, 2, &mut rng))]).is_err());
        let net = Sequential::new(vec![1, 4, 4], vec![Layer::Flatten]).unwrap();
        assert!(net.logits(&Tensor::zeros(vec![1, 1, 4, 5])).is_err());
    }
}
