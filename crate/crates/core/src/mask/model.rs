use log::{debug, info, warn};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ibm::ideal_binary_mask;
use crate::audio::{noise, scaled_noise, synth_utterance, AudioSignal, Emotion, NoiseKind, RatioKind, SpeakerProfile, PIPELINE_RATE};
use crate::error::{Error, Result};
use crate::features::{
    FeatureConfig, FeatureExtractor, MixtureFeatures, Pca, AMS_DIM, MFCC_DIM, PITCH_DIM, RASTA_DIM, RAW_DIM,
};
use crate::filterbank::{
    analyze, apply_mask_and_resynthesize, cochleagram, build_tree, Cochleagram, TFMask, WptTree,
    DEFAULT_FRAME_LEN, DEFAULT_HOP,
};
use crate::neural::{
    mlp_from_rbms, svm_train, Activation, Adam, Head, LinearSvm, Loss, Mlp, ModelBundle, Persist, Rbm,
    SvmConfig, Tensor,
};

/// Number of cochlear channels the classifiers are built for.
pub const CHANNELS: usize = 18;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MaskConfig {
    /// Local criterion in dB.
    pub lc_db: f64,
    pub channels: usize,
    /// Width of the RBM-pretrained sigmoid layer.
    pub rbm_hidden: usize,
    /// Width of the extra ReLU layer; its output is the learned feature set.
    pub learned_dim: usize,
    pub rbm_epochs: usize,
    pub rbm_lr: f64,
    pub rbm_batch: usize,
    pub finetune_epochs: usize,
    pub finetune_lr: f64,
    pub finetune_batch: usize,
    pub svm: SvmConfig,
    pub features: FeatureConfig,
    pub frame_len: usize,
    pub hop: usize,
    /// Target-to-noise RMS ratio of the training mixtures (1 = 0 dB).
    pub train_ratio: f64,
    /// Mixtures are scaled to this RMS before feature extraction.
    pub reference_rms: f64,
    pub seed: u64,
}

impl Default for MaskConfig {
    fn default() -> Self {
        Self {
            lc_db: 0.0,
            channels: CHANNELS,
            rbm_hidden: 128,
            learned_dim: 128,
            rbm_epochs: 50,
            rbm_lr: 0.01,
            rbm_batch: 32,
            finetune_epochs: 20,
            finetune_lr: 1e-3,
            finetune_batch: 64,
            svm: SvmConfig {
                c: 10.0,
                balanced: true,
                ..SvmConfig::default()
            },
            features: FeatureConfig::default(),
            frame_len: DEFAULT_FRAME_LEN,
            hop: DEFAULT_HOP,
            train_ratio: 1.0,
            reference_rms: 0.1,
            seed: 0,
        }
    }
}

impl MaskConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.lc_db.is_finite() {
            return Err(Error::Config(format!("lc_db must be finite, got {}", self.lc_db)));
        }
        if AMS_DIM + RASTA_DIM + MFCC_DIM + PITCH_DIM != RAW_DIM {
            return Err(Error::Config("raw feature layout does not add up".into()));
        }
        if self.channels != CHANNELS {
            return Err(Error::Config(format!("the filterbank has {CHANNELS} channels, got {}", self.channels)));
        }
        if self.rbm_hidden == 0 || self.learned_dim == 0 || self.rbm_batch == 0 || self.finetune_batch == 0 {
            return Err(Error::Config("layer widths and batch sizes must be positive".into()));
        }
        if !(self.train_ratio > 0.0 && self.reference_rms > 0.0) {
            return Err(Error::Config("train_ratio and reference_rms must be positive".into()));
        }
        if self.frame_len == 0 || self.hop == 0 || self.hop > self.frame_len {
            return Err(Error::Config(format!(
                "frame_len {} and hop {} must be positive with hop <= frame_len",
                self.frame_len, self.hop
            )));
        }
        if !(self.features.mel_divisor.is_finite() && self.features.mel_divisor > 0.0) {
            return Err(Error::Config("mel divisor must be positive".into()));
        }
        if !(self.rbm_lr > 0.0 && self.finetune_lr > 0.0 && self.svm.c > 0.0) {
            return Err(Error::Config("learning rates and the SVM cost must be positive".into()));
        }
        Ok(())
    }

    /// Input width of each channel's SVM.
    pub fn svm_dim(&self) -> usize {
        RAW_DIM + self.learned_dim
    }
}

/// Per-dimension z-scoring with frozen statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(rows: &[Vec<f64>]) -> Self {
        let dim = rows.first().map_or(0, Vec::len);
        let n = rows.len().max(1) as f64;
        let mut mean = vec![0.0; dim];
        for r in rows {
            mean.iter_mut().zip(r).for_each(|(m, x)| *m += x / n);
        }
        let mut var = vec![0.0; dim];
        for r in rows {
            var.iter_mut().zip(r.iter().zip(&mean)).for_each(|(v, (x, m))| *v += (x - m) * (x - m) / n);
        }
        let std = var.into_iter().map(|v| if v.sqrt() > 1e-8 { v.sqrt() } else { 1.0 }).collect();
        Self { mean, std }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(self.mean.iter().zip(&self.std)).map(|(x, (m, s))| (x - m) / s).collect()
    }

    fn store(&self, b: &mut ModelBundle, p: &str) -> Result<()> {
        b.insert_vec(format!("{p}.mean"), vec![self.mean.len()], self.mean.clone())?;
        b.insert_vec(format!("{p}.std"), vec![self.std.len()], self.std.clone())
    }

    fn restore(b: &ModelBundle, p: &str) -> Result<Self> {
        let mean = b.tensor(&format!("{p}.mean"))?.data().to_vec();
        let std = b.tensor(&format!("{p}.std"))?.data().to_vec();
        if mean.len() != std.len() {
            return Err(Error::format("<bundle>", format!("standardizer {p:?} is inconsistent")));
        }
        Ok(Self { mean, std })
    }
}

/// Final decision of a channel classifier.
#[derive(Debug, Clone, PartialEq)]
pub enum Decision {
    Svm(LinearSvm),
    /// Training labels had a single class.
    Constant(bool),
}

/// Hybrid classifier for one channel: raw features are z-scored and squashed
/// into (0, 1), passed through an RBM-initialized MLP, and the standardized
/// last-hidden activations are appended to the z-scored raw features for a
/// linear SVM.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelClassifier {
    pub pca: Pca,
    pub raw_norm: Standardizer,
    pub mlp: Mlp,
    pub learned_norm: Standardizer,
    pub decision: Decision,
}

fn squash(z: &[f64]) -> Vec<f64> {
    z.iter().map(|&v| crate::neural::sigmoid(v)).collect()
}

impl ChannelClassifier {
    /// Width of the SVM input.
    pub fn svm_dim(&self) -> usize {
        self.raw_norm.mean.len() + self.learned_norm.mean.len()
    }

    /// SVM inputs for a batch of raw feature vectors.
    pub fn combined_features(&self, raw: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        combined(&self.raw_norm, &self.mlp, &self.learned_norm, raw)
    }

    pub fn classify(&self, raw: &[Vec<f64>]) -> Result<Vec<bool>> {
        match &self.decision {
            Decision::Constant(v) => Ok(vec![*v; raw.len()]),
            Decision::Svm(svm) => Ok(self.combined_features(raw)?.iter().map(|x| svm.predict(x)).collect()),
        }
    }
}

/// Standardized raw features plus standardized last-hidden activations.
fn combined(raw_norm: &Standardizer, mlp: &Mlp, learned_norm: &Standardizer, raw: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    if raw.is_empty() {
        return Ok(Vec::new());
    }
    let z: Vec<Vec<f64>> = raw.iter().map(|r| raw_norm.apply(r)).collect();
    let learned = last_hidden(mlp, &z)?;
    Ok(z
        .into_iter()
        .zip(learned)
        .map(|(mut v, h)| {
            v.extend(learned_norm.apply(&h));
            v
        })
        .collect())
}

fn last_hidden(mlp: &Mlp, z: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let x = Tensor::from_rows(&z.iter().map(|r| squash(r)).collect::<Vec<_>>())?;
    let outs = mlp.forward(&x)?;
    let h = &outs[outs.len() - 2];
    Ok((0..h.rows()).map(|i| h.row(i).to_vec()).collect())
}

/// The trained per-channel classifiers.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskModel {
    pub config: MaskConfig,
    pub channels: Vec<ChannelClassifier>,
}

/// One training mixture with its analysis products.
struct Prepared {
    features: MixtureFeatures,
    ibm: TFMask,
}

fn normalize(x: &[f64], reference_rms: f64) -> Vec<f64> {
    let r = crate::audio::rms(x);
    if r > 0.0 {
        x.iter().map(|v| v * reference_rms / r).collect()
    } else {
        x.to_vec()
    }
}

fn analysis(x: &[f64], tree: &WptTree, cfg: &MaskConfig) -> Result<Cochleagram> {
    let sig = AudioSignal::new(x.to_vec(), PIPELINE_RATE)?;
    cochleagram(&analyze(&sig, tree), cfg.frame_len, cfg.hop)
}

fn prepare(target: &AudioSignal, noise: &AudioSignal, tree: &WptTree, fx: &FeatureExtractor, cfg: &MaskConfig) -> Result<Prepared> {
    if target.sample_rate() != PIPELINE_RATE {
        return Err(Error::Unsupported(format!("mask training expects {PIPELINE_RATE} Hz audio")));
    }
    let n = scaled_noise(target, noise, cfg.train_ratio, RatioKind::Amplitude)?;
    let mix: Vec<f64> = target.samples().iter().zip(&n).map(|(t, n)| t + n).collect();
    let gain = {
        let r = crate::audio::rms(&mix);
        if r > 0.0 {
            cfg.reference_rms / r
        } else {
            1.0
        }
    };
    let scale = |x: &[f64]| x.iter().map(|v| v * gain).collect::<Vec<_>>();
    let (t, n, mix) = (scale(target.samples()), scale(&n), scale(&mix));
    let ibm = ideal_binary_mask(&analysis(&t, tree, cfg)?, &analysis(&n, tree, cfg)?, cfg.lc_db)?;
    let coch = analysis(&mix, tree, cfg)?;
    Ok(Prepared {
        features: fx.extract(&coch, &mix),
        ibm,
    })
}

/// Trains one classifier per channel from `(target, noise)` pairs, each mixed
/// at `cfg.train_ratio`.
pub fn train_mask_model(pairs: &[(AudioSignal, AudioSignal)], cfg: &MaskConfig) -> Result<MaskModel> {
    cfg.validate()?;
    if pairs.is_empty() {
        return Err(Error::DegenerateInput("no training mixtures".into()));
    }
    if pairs.len() < 10 {
        warn!("only {} training mixtures; at least 10 are recommended", pairs.len());
    }
    let tree = build_tree();
    let fx = FeatureExtractor::new(&cfg.features, PIPELINE_RATE)?;
    let prepared = pairs
        .iter()
        .map(|(t, n)| prepare(t, n, &tree, &fx, cfg))
        .collect::<Result<Vec<_>>>()?;
    info!(
        "mask training: {} mixtures, {} frames",
        prepared.len(),
        prepared.iter().map(|p| p.features.n_frames()).sum::<usize>()
    );
    let channels = (0..cfg.channels)
        .map(|c| train_channel(c, &prepared, cfg))
        .collect::<Result<Vec<_>>>()?;
    Ok(MaskModel {
        config: cfg.clone(),
        channels,
    })
}

fn channel_seed(seed: u64, c: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(c as u64 + 1)
}

fn train_channel(c: usize, data: &[Prepared], cfg: &MaskConfig) -> Result<ChannelClassifier> {
    let mut rng = ChaCha8Rng::seed_from_u64(channel_seed(cfg.seed, c));

    let spectra: Vec<Vec<f64>> = data
        .iter()
        .flat_map(|p| p.features.channels[c].ams_spectrum.iter().cloned())
        .collect();
    let mut pca = Pca::new(AMS_DIM);
    pca.fit(&spectra)?;

    let mut raw = Vec::new();
    let mut labels = Vec::new();
    for p in data {
        raw.extend(p.features.vectors(c, &pca)?);
        labels.extend(p.ibm.row(c).iter().map(|&b| b == 1));
    }
    let raw_norm = Standardizer::fit(&raw);
    let z: Vec<Vec<f64>> = raw.iter().map(|r| raw_norm.apply(r)).collect();
    let squashed: Vec<Vec<f64>> = z.iter().map(|r| squash(r)).collect();
    let n = squashed.len();

    // stage 1: unsupervised pretraining
    let mut rbm = Rbm::new(RAW_DIM, cfg.rbm_hidden, &mut rng);
    let flat: Vec<f64> = squashed.concat();
    let errs = rbm.train(&flat, cfg.rbm_epochs, cfg.rbm_batch, cfg.rbm_lr, &mut rng);
    debug!("channel {c}: RBM reconstruction error {:?}", errs.last());

    let mut mlp = mlp_from_rbms(
        std::slice::from_ref(&rbm),
        &[(cfg.learned_dim, Activation::Relu)],
        1,
        Head::Logistic,
        &mut rng,
    )?;

    let positives = labels.iter().filter(|&&l| l).count();
    let single_class = positives == 0 || positives == n;

    // stage 2: supervised fine-tuning
    if !single_class {
        let mut adam = Adam::new(cfg.finetune_lr, &mlp.param_sizes());
        let mut order: Vec<usize> = (0..n).collect();
        for epoch in 0..cfg.finetune_epochs {
            order.shuffle(&mut rng);
            let mut total = 0.0;
            for chunk in order.chunks(cfg.finetune_batch) {
                let xb: Vec<f64> = chunk.iter().flat_map(|&i| squashed[i].iter().copied()).collect();
                let yb: Vec<f64> = chunk.iter().map(|&i| labels[i] as u8 as f64).collect();
                let x = Tensor::new(vec![chunk.len(), RAW_DIM], xb)?;
                let y = Tensor::new(vec![chunk.len(), 1], yb)?;
                let (loss, grad) = mlp.backprop(&x, &y, Loss::BinaryCrossEntropy, 1.0)?;
                total += loss * chunk.len() as f64;
                let slices = grad.slices();
                adam.step(&mut mlp.params_mut(), &slices);
            }
            debug!("channel {c}: epoch {epoch} BCE {:.4}", total / n as f64);
        }
    }

    // stage 3: SVM on raw + learned features
    let learned = last_hidden(&mlp, &z)?;
    let learned_norm = Standardizer::fit(&learned);
    let decision = if single_class {
        let value = positives == n;
        warn!("channel {c}: every training unit is labelled {}; using a constant predictor", value as u8);
        Decision::Constant(value)
    } else {
        let rows = combined(&raw_norm, &mlp, &learned_norm, &raw)?;
        Decision::Svm(svm_train(&rows, &labels, &cfg.svm)?)
    };
    Ok(ChannelClassifier {
        pca,
        raw_norm,
        mlp,
        learned_norm,
        decision,
    })
}

impl MaskModel {
    /// Raw feature vectors of every channel of `mixture`, on the same scale
    /// as training.
    fn mixture_features(&self, mixture: &AudioSignal) -> Result<MixtureFeatures> {
        let tree = build_tree();
        let fx = FeatureExtractor::new(&self.config.features, PIPELINE_RATE)?;
        let x = normalize(mixture.samples(), self.config.reference_rms);
        let coch = analysis(&x, &tree, &self.config)?;
        Ok(fx.extract(&coch, &x))
    }

    /// Estimated binary mask for `mixture` (16 kHz), one row per channel.
    pub fn estimate_mask(&self, mixture: &AudioSignal) -> Result<TFMask> {
        if mixture.sample_rate() != PIPELINE_RATE {
            return Err(Error::Unsupported(format!(
                "mask estimation expects {PIPELINE_RATE} Hz audio, got {} Hz",
                mixture.sample_rate()
            )));
        }
        let feats = self.mixture_features(mixture)?;
        let mut mask = TFMask::zeros(self.channels.len(), feats.n_frames());
        for (c, clf) in self.channels.iter().enumerate() {
            let raw = feats.vectors(c, &clf.pca)?;
            for (t, v) in clf.classify(&raw)?.into_iter().enumerate() {
                mask.set(c, t, v);
            }
        }
        Ok(mask)
    }

    /// Estimates the mask and resynthesizes the mixture through it.
    pub fn segregate(&self, mixture: &AudioSignal) -> Result<(AudioSignal, TFMask)> {
        let mask = self.estimate_mask(mixture)?;
        let tree = build_tree();
        let coch = cochleagram(&analyze(mixture, &tree), self.config.frame_len, self.config.hop)?;
        Ok((apply_mask_and_resynthesize(&coch, &mask, &tree)?, mask))
    }

    /// Ideal mask of a `(target, noise)` pair as training would build it.
    pub fn reference_mask(&self, target: &AudioSignal, noise: &AudioSignal) -> Result<TFMask> {
        let tree = build_tree();
        let t = analysis(target.samples(), &tree, &self.config)?;
        let n = analysis(noise.samples(), &tree, &self.config)?;
        ideal_binary_mask(&t, &n, self.config.lc_db)
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        let mut b = ModelBundle::new();
        self.store(&mut b, "mask")?;
        b.save(path)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Self::restore(&ModelBundle::load(path)?, "mask")
    }
}

impl Persist for MaskModel {
    fn store(&self, b: &mut ModelBundle, p: &str) -> Result<()> {
        b.set_meta(format!("{p}.kind"), "mask");
        b.set_meta(format!("{p}.config"), serde_json::to_string(&self.config)?);
        b.set_meta(format!("{p}.channels"), self.channels.len().to_string());
        for (c, clf) in self.channels.iter().enumerate() {
            let q = format!("{p}.ch{c:02}");
            clf.pca.store(b, &format!("{q}.pca"))?;
            clf.raw_norm.store(b, &format!("{q}.raw_norm"))?;
            clf.mlp.store(b, &format!("{q}.mlp"))?;
            clf.learned_norm.store(b, &format!("{q}.learned_norm"))?;
            match &clf.decision {
                Decision::Svm(svm) => {
                    b.set_meta(format!("{q}.decision"), "svm");
                    svm.store(b, &format!("{q}.svm"))?;
                }
                Decision::Constant(v) => b.set_meta(format!("{q}.decision"), if *v { "one" } else { "zero" }),
            }
        }
        Ok(())
    }

    fn restore(b: &ModelBundle, p: &str) -> Result<Self> {
        if b.meta(&format!("{p}.kind"))? != "mask" {
            return Err(Error::format("<bundle>", "not a mask model"));
        }
        let config: MaskConfig = serde_json::from_str(b.meta(&format!("{p}.config"))?)?;
        let count: usize = b.meta_parse(&format!("{p}.channels"))?;
        if count != config.channels {
            return Err(Error::format("<bundle>", "channel count does not match the config"));
        }
        let channels = (0..count)
            .map(|c| {
                let q = format!("{p}.ch{c:02}");
                let decision = match b.meta(&format!("{q}.decision"))? {
                    "svm" => Decision::Svm(LinearSvm::restore(b, &format!("{q}.svm"))?),
                    "one" => Decision::Constant(true),
                    "zero" => Decision::Constant(false),
                    other => return Err(Error::format("<bundle>", format!("unknown decision {other:?}"))),
                };
                Ok(ChannelClassifier {
                    pca: Pca::restore(b, &format!("{q}.pca"))?,
                    raw_norm: Standardizer::restore(b, &format!("{q}.raw_norm"))?,
                    mlp: Mlp::restore(b, &format!("{q}.mlp"))?,
                    learned_norm: Standardizer::restore(b, &format!("{q}.learned_norm"))?,
                    decision,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { config, channels })
    }
}

/// `count` `(target, noise)` pairs of synthetic speech against the given
/// noise families in turn, for mask training. Speakers come from a roster
/// seeded independently of any SID corpus.
pub fn synthetic_training_pairs(count: usize, kinds: &[NoiseKind], seed: u64) -> Result<Vec<(AudioSignal, AudioSignal)>> {
    if kinds.is_empty() {
        return Err(Error::Config("at least one noise kind is required".into()));
    }
    let roster = SpeakerProfile::roster(10, seed ^ 0x4D41_534B);
    Ok((0..count)
        .map(|i| {
            let speaker = &roster[i % roster.len()];
            let emotion = Emotion::ALL[(i / roster.len()) % Emotion::ALL.len()];
            let variant = seed.wrapping_mul(31).wrapping_add(i as u64 + 7919);
            let target = synth_utterance(speaker, emotion, 200 + i, variant);
            let n = noise(kinds[i % kinds.len()], target.len(), variant ^ 0xA11CE);
            (target, n)
        })
        .collect())
}

/// `count` `(target, noise)` pairs cycling through the given clean targets
/// and noise families, each noise track as long as its target.
pub fn pairs_from_targets(
    targets: &[AudioSignal],
    count: usize,
    kinds: &[NoiseKind],
    seed: u64,
) -> Result<Vec<(AudioSignal, AudioSignal)>> {
    if kinds.is_empty() {
        return Err(Error::Config("at least one noise kind is required".into()));
    }
    if targets.is_empty() {
        return Err(Error::DegenerateInput("no target signals for mask training".into()));
    }
    (0..count)
        .map(|i| {
            let target = targets[i % targets.len()].to_pipeline_rate()?;
            let variant = seed.wrapping_mul(31).wrapping_add(i as u64 + 7919);
            let n = noise(kinds[i % kinds.len()], target.len(), variant ^ 0xA11CE);
            Ok((target, n))
        })
        .collect()
}

/// `count` `(target, noise)` pairs whose targets are gated harmonic
/// complexes (F0 100–300 Hz, flat harmonics up to 7 kHz, on/off segments of
/// 80–300 ms) against the given noise families, `secs` long each.
pub fn tone_training_pairs(count: usize, kinds: &[NoiseKind], secs: f64, seed: u64) -> Result<Vec<(AudioSignal, AudioSignal)>> {
    if kinds.is_empty() {
        return Err(Error::Config("at least one noise kind is required".into()));
    }
    let fs = PIPELINE_RATE as f64;
    let len = (secs * fs) as usize;
    if len == 0 {
        return Err(Error::Config("tone mixtures need a positive duration".into()));
    }
    Ok((0..count)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x2545_F491_4F6C_DD1D).wrapping_add(i as u64));
            let f0 = rng.random_range(100.0..300.0);
            let harmonics = (7000.0 / f0) as usize;
            let phases: Vec<f64> = (0..harmonics).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect();
            let mut gate = vec![0.0; len];
            let mut pos = 0;
            let mut on = rng.random::<bool>();
            while pos < len {
                let seg = (rng.random_range(0.08..0.3) * fs) as usize;
                let end = (pos + seg).min(len);
                if on {
                    let ramp = 80.min((end - pos) / 2).max(1);
                    for (k, g) in gate[pos..end].iter_mut().enumerate() {
                        let edge = k.min(end - pos - 1 - k);
                        *g = (edge as f64 / ramp as f64).min(1.0);
                    }
                }
                pos = end;
                on = !on;
            }
            let samples = gate
                .iter()
                .enumerate()
                .map(|(t, g)| {
                    let tt = t as f64 / fs;
                    g * phases
                        .iter()
                        .enumerate()
                        .map(|(h, ph)| (std::f64::consts::TAU * f0 * (h + 1) as f64 * tt + ph).sin())
                        .sum::<f64>()
                })
                .collect();
            let target = AudioSignal::new(samples, PIPELINE_RATE).expect("finite tone");
            let n = noise(kinds[i % kinds.len()], len, seed ^ (i as u64).wrapping_mul(0x9E37));
            (target, n)
        })
        .collect())
}
