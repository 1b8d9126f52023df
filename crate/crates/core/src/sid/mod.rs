//! Speaker identification: fixed-length log-spectrogram inputs and a small
//! VGG-style convolutional classifier.

use std::path::Path;

use log::{debug, info};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::audio::{AudioSignal, PIPELINE_RATE};
use crate::error::{Error, Result};
use crate::filterbank::{spectrogram_with, Spectrogram, SPEC_HOP, SPEC_WINDOW};
use crate::mask::MaskModel;
use crate::neural::{Adam, Conv2d, Dense, Layer, ModelBundle, Persist, Sequential, Tensor};

pub const DEFAULT_PAD_MS: f64 = 1024.0;

/// A trailing window shorter than this share of the pad length is dropped
/// when the signal already filled at least one window.
const MIN_TAIL_SHARE: f64 = 0.25;

/// Convolutional topology: `widths.len()` blocks of `convs_per_block`
/// 3×3 conv + ReLU pairs followed by 2×2 max-pooling, then a hidden dense
/// layer and the speaker layer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct VggConfig {
    pub widths: Vec<usize>,
    pub convs_per_block: usize,
    pub fc_hidden: usize,
}

impl Default for VggConfig {
    fn default() -> Self {
        Self {
            widths: vec![8, 16, 32, 64, 64],
            convs_per_block: 2,
            fc_hidden: 64,
        }
    }
}

impl VggConfig {
    /// Single conv per block at half the default widths; trains in minutes
    /// on one core.
    pub fn compact() -> Self {
        Self {
            widths: vec![4, 8, 16, 32, 32],
            convs_per_block: 1,
            fc_hidden: 64,
        }
    }

    /// VGG-16 widths, for reference; far too slow for desk use.
    pub fn full_scale() -> Self {
        Self {
            widths: vec![64, 128, 256, 512, 512],
            convs_per_block: 2,
            fc_hidden: 4096,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.widths.is_empty() || self.widths.contains(&0) || self.convs_per_block == 0 || self.fc_hidden == 0 {
            return Err(Error::Config("network widths, conv count and hidden size must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub batch: usize,
    pub input: InputSpec,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 25,
            lr: 4e-5,
            batch: 8,
            input: InputSpec::default(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || !(self.lr > 0.0) || self.batch == 0 || !(self.input.pad_ms > 0.0) || !(self.input.dynamic_range > 0.0) {
            return Err(Error::Config("epochs, lr, batch, pad_ms and dynamic_range must be positive".into()));
        }
        Ok(())
    }
}

/// Samples in one input window.
pub fn pad_samples(pad_ms: f64, sample_rate: u32) -> usize {
    (pad_ms * sample_rate as f64 / 1000.0).round() as usize
}

/// Log spectrograms of consecutive `pad_ms` windows of `sig`, the last one
/// zero-padded. A short signal yields exactly one window.
pub fn prepare_input(sig: &AudioSignal, pad_ms: f64) -> Result<Vec<Spectrogram>> {
    if sig.is_empty() {
        return Err(Error::DegenerateInput("cannot identify an empty signal".into()));
    }
    let win = pad_samples(pad_ms, sig.sample_rate());
    if win < SPEC_WINDOW {
        return Err(Error::Config(format!("pad_ms {pad_ms} is shorter than one spectrogram window")));
    }
    let x = sig.samples();
    let mut out = Vec::new();
    let mut start = 0;
    while start < x.len() {
        let end = (start + win).min(x.len());
        if start > 0 && ((end - start) as f64) < MIN_TAIL_SHARE * win as f64 {
            break;
        }
        let mut chunk = x[start..end].to_vec();
        chunk.resize(win, 0.0);
        out.push(spectrogram_with(&chunk, SPEC_WINDOW, SPEC_HOP));
        start += win;
    }
    Ok(out)
}

/// Default dynamic range kept below each spectrogram's peak, in log10
/// magnitude (1.5 decades = 30 dB).
pub const DEFAULT_DYNAMIC_RANGE: f64 = 1.5;

/// Spectrogram values floored at `peak − dynamic_range` (log10 units), then
/// shifted and scaled to zero mean and unit variance (bin-major).
pub fn normalize_spectrogram(spec: &Spectrogram, dynamic_range: f64) -> Vec<f64> {
    let peak = spec.data().iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let d: Vec<f64> = spec.data().iter().map(|v| v.max(peak - dynamic_range)).collect();
    let n = d.len().max(1) as f64;
    let mean = d.iter().sum::<f64>() / n;
    let var = d.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let sd = if var > 1e-20 { var.sqrt() } else { 1.0 };
    d.iter().map(|v| (v - mean) / sd).collect()
}

/// How a waveform becomes network input.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InputSpec {
    pub pad_ms: f64,
    pub dynamic_range: f64,
}

impl Default for InputSpec {
    fn default() -> Self {
        Self {
            pad_ms: DEFAULT_PAD_MS,
            dynamic_range: DEFAULT_DYNAMIC_RANGE,
        }
    }
}

/// Normalized network inputs, one per window, optionally after segregation.
pub fn network_inputs(sig: &AudioSignal, spec: &InputSpec, segregator: Option<&MaskModel>) -> Result<Vec<Vec<f64>>> {
    let sig = match segregator {
        Some(model) => model.segregate(&sig.to_pipeline_rate()?)?.0,
        None => sig.to_pipeline_rate()?,
    };
    Ok(prepare_input(&sig, spec.pad_ms)?
        .iter()
        .map(|s| normalize_spectrogram(s, spec.dynamic_range))
        .collect())
}

/// Per-sample input shape `[1, bins, frames]` for a pad length.
pub fn input_shape(pad_ms: f64) -> Vec<usize> {
    let n = pad_samples(pad_ms, PIPELINE_RATE);
    vec![1, SPEC_WINDOW / 2 + 1, (n - SPEC_WINDOW) / SPEC_HOP + 1]
}

/// Builds the convolutional stack for a per-sample `[channels, height, width]`
/// input and `n_speakers` outputs.
pub fn vgg_network(arch: &VggConfig, input_shape: &[usize], n_speakers: usize, rng: &mut ChaCha8Rng) -> Result<Sequential> {
    arch.validate()?;
    if n_speakers < 2 {
        return Err(Error::DegenerateInput("speaker identification needs at least two speakers".into()));
    }
    let mut layers = Vec::new();
    let mut ch = *input_shape
        .first()
        .ok_or_else(|| Error::Shape("empty input shape".into()))?;
    for &w in &arch.widths {
        for _ in 0..arch.convs_per_block {
            layers.push(Layer::Conv2d(Conv2d::glorot(ch, w, rng)));
            layers.push(Layer::Relu);
            ch = w;
        }
        layers.push(Layer::MaxPool2);
    }
    layers.push(Layer::Flatten);
    let flat = Sequential::new(input_shape.to_vec(), layers.clone())?.output_dim();
    layers.push(Layer::Dense(Dense::glorot(flat, arch.fc_hidden, rng)));
    layers.push(Layer::Relu);
    // small output weights start the softmax near uniform
    let mut out = Dense::glorot(arch.fc_hidden, n_speakers, rng);
    out.weights.iter_mut().for_each(|w| *w *= 0.1);
    layers.push(Layer::Dense(out));
    Sequential::new(input_shape.to_vec(), layers)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpeechVggNet {
    pub net: Sequential,
    pub arch: VggConfig,
    pub n_speakers: usize,
    pub input: InputSpec,
}

impl SpeechVggNet {
    pub fn new(arch: &VggConfig, input: InputSpec, n_speakers: usize, rng: &mut ChaCha8Rng) -> Result<Self> {
        Ok(Self {
            net: vgg_network(arch, &input_shape(input.pad_ms), n_speakers, rng)?,
            arch: arch.clone(),
            n_speakers,
            input,
        })
    }

    fn batch(&self, inputs: &[&[f64]]) -> Result<Tensor> {
        let mut shape = vec![inputs.len()];
        shape.extend_from_slice(&self.net.input_shape);
        Tensor::new(shape, inputs.concat())
    }

    /// Softmax posteriors of each input window.
    pub fn posteriors(&self, inputs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let mut out = Vec::with_capacity(inputs.len());
        for chunk in inputs.chunks(16) {
            let refs: Vec<&[f64]> = chunk.iter().map(Vec::as_slice).collect();
            let p = self.net.predict_proba(&self.batch(&refs)?)?;
            out.extend((0..p.rows()).map(|i| p.row(i).to_vec()));
        }
        Ok(out)
    }

    /// Speaker decision from an utterance's windows: the mean log-posterior
    /// is renormalized into a probability vector.
    pub fn identify_inputs(&self, inputs: &[Vec<f64>]) -> Result<(usize, Vec<f64>)> {
        if inputs.is_empty() {
            return Err(Error::DegenerateInput("no input windows".into()));
        }
        let post = self.posteriors(inputs)?;
        let k = self.n_speakers;
        let mut mean = vec![0.0; k];
        for p in &post {
            for (m, v) in mean.iter_mut().zip(p) {
                *m += v.max(1e-300).ln() / post.len() as f64;
            }
        }
        let top = mean.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut prob: Vec<f64> = mean.iter().map(|m| (m - top).exp()).collect();
        let z: f64 = prob.iter().sum();
        prob.iter_mut().for_each(|p| *p /= z);
        let best = argmax(&prob);
        Ok((best, prob))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut b = ModelBundle::new();
        self.store(&mut b, "sid")?;
        b.save(path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::restore(&ModelBundle::load(path)?, "sid")
    }
}

fn argmax(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, &x)| if x > best.1 { (i, x) } else { best })
        .0
}

impl Persist for SpeechVggNet {
    fn store(&self, b: &mut ModelBundle, p: &str) -> Result<()> {
        b.set_meta(format!("{p}.kind"), "speech-vgg");
        b.set_meta(format!("{p}.arch"), serde_json::to_string(&self.arch)?);
        b.set_meta(format!("{p}.speakers"), self.n_speakers.to_string());
        b.set_meta(format!("{p}.input"), serde_json::to_string(&self.input)?);
        self.net.store(b, &format!("{p}.net"))
    }

    fn restore(b: &ModelBundle, p: &str) -> Result<Self> {
        if b.meta(&format!("{p}.kind"))? != "speech-vgg" {
            return Err(Error::format("<bundle>", "not a speaker model"));
        }
        Ok(Self {
            net: Sequential::restore(b, &format!("{p}.net"))?,
            arch: serde_json::from_str(b.meta(&format!("{p}.arch"))?)?,
            n_speakers: b.meta_parse(&format!("{p}.speakers"))?,
            input: serde_json::from_str(b.meta(&format!("{p}.input"))?)?,
        })
    }
}

/// Speaker decision for one utterance, segregated first when a mask model
/// is given.
pub fn identify(net: &SpeechVggNet, sig: &AudioSignal, segregator: Option<&MaskModel>) -> Result<(usize, Vec<f64>)> {
    net.identify_inputs(&network_inputs(sig, &net.input, segregator)?)
}

/// One row of the training log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    /// Mean minibatch loss over the epoch.
    pub loss: f64,
    /// Accuracy on the minibatches as they were seen during the epoch.
    pub train_acc: f64,
}

pub fn write_training_log(path: impl AsRef<Path>, log: &[EpochLog]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in log {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Trains on already prepared windows: `(input, speaker)` pairs.
pub fn train_on_inputs(
    samples: &[(Vec<f64>, usize)],
    n_speakers: usize,
    arch: &VggConfig,
    cfg: &TrainConfig,
) -> Result<(SpeechVggNet, Vec<EpochLog>)> {
    cfg.validate()?;
    let mut seen = vec![false; n_speakers];
    for (_, s) in samples {
        if *s >= n_speakers {
            return Err(Error::Shape(format!("speaker {s} out of range for {n_speakers} speakers")));
        }
        seen[*s] = true;
    }
    if seen.iter().filter(|&&s| s).count() < 2 {
        return Err(Error::DegenerateInput("training data must cover at least two speakers".into()));
    }
    let len: usize = input_shape(cfg.input.pad_ms).iter().product();
    if samples.iter().any(|(x, _)| x.len() != len) {
        return Err(Error::Shape(format!("inputs must hold {len} values")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = SpeechVggNet::new(arch, cfg.input, n_speakers, &mut rng)?;
    info!(
        "speaker net: {} parameters, {} training windows",
        model.net.n_params(),
        samples.len()
    );
    let mut adam = Adam::new(cfg.lr, &model.net.param_sizes());
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut log = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let (mut total, mut correct) = (0.0, 0usize);
        for chunk in order.chunks(cfg.batch) {
            let refs: Vec<&[f64]> = chunk.iter().map(|&i| samples[i].0.as_slice()).collect();
            let labels: Vec<usize> = chunk.iter().map(|&i| samples[i].1).collect();
            let x = model.batch(&refs)?;
            let (loss, grads, p) = model.net.train_pass(&x, &labels)?;
            total += loss * chunk.len() as f64;
            correct += (0..p.rows()).filter(|&r| argmax(p.row(r)) == labels[r]).count();
            let slices: Vec<&[f64]> = grads.iter().map(Vec::as_slice).collect();
            adam.step(&mut model.net.params_mut(), &slices);
        }
        let row = EpochLog {
            epoch,
            loss: total / samples.len() as f64,
            train_acc: correct as f64 / samples.len() as f64,
        };
        debug!("epoch {epoch}: loss {:.4}, accuracy {:.3}", row.loss, row.train_acc);
        log.push(row);
    }
    Ok((model, log))
}

/// Trains a speaker net on labelled utterances; with a segregator every
/// utterance is mask-processed first.
pub fn train_sid(
    signals: &[AudioSignal],
    speakers: &[usize],
    arch: &VggConfig,
    cfg: &TrainConfig,
    segregator: Option<&MaskModel>,
) -> Result<(SpeechVggNet, Vec<EpochLog>)> {
    if signals.len() != speakers.len() {
        return Err(Error::Shape("one speaker label per signal is required".into()));
    }
    let n_speakers = speakers.iter().max().map_or(0, |m| m + 1);
    let mut samples = Vec::new();
    for (sig, &s) in signals.iter().zip(speakers) {
        for x in network_inputs(sig, &cfg.input, segregator)? {
            samples.push((x, s));
        }
    }
    train_on_inputs(&samples, n_speakers, arch, cfg)
}
