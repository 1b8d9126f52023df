//! Audio ingestion, mixing and the synthetic labelled corpus.
//!
//! Everything downstream runs on [`AudioSignal`] at [`PIPELINE_RATE`]; 8 kHz
//! material is upsampled on the way in.

mod manifest;
mod resample;
pub mod synth;
mod wav;

pub use manifest::{Condition, CorpusManifest, Emotion, ManifestEntry};
pub use resample::resample;
pub use synth::{generate_corpus, noise, synth_corpus, synth_utterance, Corpus, NoiseKind, SpeakerProfile};
pub use wav::{read_wav, write_wav};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rate every pipeline stage operates at.
pub const PIPELINE_RATE: u32 = 16_000;

/// Mono sample buffer with its sample rate. Samples are nominally in [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct AudioSignal {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl AudioSignal {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::Domain("sample rate must be positive".into()));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::Domain(format!("non-finite sample at index {i}")));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn zeros(len: usize, sample_rate: u32) -> Self {
        Self {
            samples: vec![0.0; len],
            sample_rate,
        }
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn rms(&self) -> f64 {
        rms(&self.samples)
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|s| s * s).sum()
    }

    /// Returns a copy multiplied by `gain`.
    pub fn scaled(&self, gain: f64) -> Self {
        Self {
            samples: self.samples.iter().map(|s| s * gain).collect(),
            sample_rate: self.sample_rate,
        }
    }

    /// Brings the signal to the pipeline rate if it is not already there.
    pub fn to_pipeline_rate(&self) -> Result<Self> {
        resample(self, PIPELINE_RATE)
    }
}

pub fn rms(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    (x.iter().map(|s| s * s).sum::<f64>() / x.len() as f64).sqrt()
}

/// How a mixing ratio is read: as an RMS amplitude ratio or as a power ratio.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum RatioKind {
    #[default]
    Amplitude,
    Power,
}

/// Adds `noise` to `target` so that RMS(target) / RMS(scaled noise) equals
/// `ratio` (or its square root when `kind` is [`RatioKind::Power`]).
///
/// The noise is cropped or looped to the target length.
pub fn mix_at_ratio(
    target: &AudioSignal,
    noise: &AudioSignal,
    ratio: f64,
    kind: RatioKind,
) -> Result<AudioSignal> {
    let scaled = scaled_noise(target, noise, ratio, kind)?;
    let samples = target
        .samples
        .iter()
        .zip(&scaled)
        .map(|(t, n)| t + n)
        .collect();
    AudioSignal::new(samples, target.sample_rate)
}

/// The noise track exactly as [`mix_at_ratio`] adds it to the target.
pub fn scaled_noise(
    target: &AudioSignal,
    noise: &AudioSignal,
    ratio: f64,
    kind: RatioKind,
) -> Result<Vec<f64>> {
    if !(ratio.is_finite() && ratio > 0.0) {
        return Err(Error::Domain(format!("mixing ratio must be positive, got {ratio}")));
    }
    if target.sample_rate != noise.sample_rate {
        return Err(Error::Shape(format!(
            "sample rates differ: target {} Hz, noise {} Hz",
            target.sample_rate, noise.sample_rate
        )));
    }
    if noise.is_empty() {
        return Err(Error::DegenerateInput("noise track is empty".into()));
    }
    let looped: Vec<f64> = noise
        .samples
        .iter()
        .copied()
        .cycle()
        .take(target.len())
        .collect();
    let noise_rms = rms(&looped);
    if noise_rms == 0.0 {
        return Err(Error::DegenerateInput("noise track is silent".into()));
    }
    let amplitude_ratio = match kind {
        RatioKind::Amplitude => ratio,
        RatioKind::Power => ratio.sqrt(),
    };
    let gain = target.rms() / (amplitude_ratio * noise_rms);
    Ok(looped.into_iter().map(|n| n * gain).collect())
}

/// SNR in dB of `estimate` against a known clean `reference`.
pub fn snr_db(reference: &[f64], estimate: &[f64]) -> f64 {
    let signal: f64 = reference.iter().map(|r| r * r).sum();
    let error: f64 = reference
        .iter()
        .zip(estimate)
        .map(|(r, e)| (r - e) * (r - e))
        .sum();
    10.0 * (signal / error.max(f64::MIN_POSITIVE)).log10()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sig(x: Vec<f64>) -> AudioSignal {
        AudioSignal::new(x, 16_000).unwrap()
    }

    #[test]
    fn rejects_non_finite_samples() {
        assert!(AudioSignal::new(vec![0.0, f64::NAN], 16_000).is_err());
        assert!(AudioSignal::new(vec![0.0], 0).is_err());
    }

    #[test]
    fn ratio_two_gives_half_rms_noise() {
        let target = sig((0..1600).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect());
        let noise = sig((0..1600).map(|i| ((i * 7919) % 13) as f64 - 6.0).collect());
        let scaled = scaled_noise(&target, &noise, 2.0, RatioKind::Amplitude).unwrap();
        assert!((rms(&scaled) - 0.5).abs() < 1e-12);
        let mix = mix_at_ratio(&target, &noise, 2.0, RatioKind::Amplitude).unwrap();
        let snr = snr_db(target.samples(), mix.samples());
        assert!((snr - 20.0 * 2f64.log10()).abs() < 1e-9, "{snr}");
    }

    #[test]
    fn ratio_one_with_identical_tracks_doubles() {
        let x: Vec<f64> = (0..500).map(|i| (i as f64 * 0.1).sin()).collect();
        let mix = mix_at_ratio(&sig(x.clone()), &sig(x.clone()), 1.0, RatioKind::Amplitude).unwrap();
        for (m, t) in mix.samples().iter().zip(&x) {
            assert!((m - 2.0 * t).abs() < 1e-12);
        }
    }

    #[test]
    fn power_ratio_is_square_of_amplitude_ratio() {
        let x: Vec<f64> = (0..500).map(|i| (i as f64 * 0.1).sin()).collect();
        let n: Vec<f64> = (0..500).map(|i| (i as f64 * 0.37).cos()).collect();
        let a = scaled_noise(&sig(x.clone()), &sig(n.clone()), 2.0, RatioKind::Amplitude).unwrap();
        let p = scaled_noise(&sig(x), &sig(n), 4.0, RatioKind::Power).unwrap();
        for (a, p) in a.iter().zip(&p) {
            assert!((a - p).abs() < 1e-12);
        }
    }

    #[test]
    fn silent_noise_is_degenerate() {
        let err = mix_at_ratio(&sig(vec![1.0; 10]), &sig(vec![0.0; 10]), 2.0, RatioKind::Amplitude);
        assert!(matches!(err, Err(Error::DegenerateInput(_))));
    }

    #[test]
    fn short_noise_is_looped() {
        let target = sig(vec![1.0; 10]);
        let noise = sig(vec![1.0, -1.0, 1.0]);
        let scaled = scaled_noise(&target, &noise, 1.0, RatioKind::Amplitude).unwrap();
        assert_eq!(scaled.len(), 10);
        assert!(scaled[3] > 0.0 && scaled[4] < 0.0);
    }
}
