//! Synthetic speakers, emotional styles, noise tracks and the labelled corpus
//! built from them.
//!
//! A voice is a harmonic source with a per-speaker F0 and spectral tilt shaped
//! by a four-formant vocal-tract envelope whose formants are scaled by the
//! speaker's vocal-tract factor. Phrases (vowel/consonant sequences) depend only
//! on the utterance index, so speakers differ in voice and not in content.
//! Emotions are deterministic pitch, pitch-range, energy and rate changes.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::manifest::{Condition, CorpusManifest, Emotion, ManifestEntry};
use super::{write_wav, AudioSignal, PIPELINE_RATE};
use crate::error::{Error, Result};

/// Nominal utterance RMS before the emotional energy factor.
const BASE_RMS: f64 = 0.08;
/// Recording noise floor relative to [`BASE_RMS`], dB.
const FLOOR_DB: f64 = -50.0;
const MAX_UTTERANCE_SECS: f64 = 0.98;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeakerProfile {
    /// Base fundamental frequency, Hz.
    pub f0: f64,
    /// Multiplier on every vowel formant (shorter tract = larger factor).
    pub formant_scale: f64,
    /// Source spectral tilt in dB per octave.
    pub tilt_db_per_octave: f64,
    /// Aspiration noise level relative to the voiced part.
    pub breathiness: f64,
}

impl SpeakerProfile {
    pub fn new(f0: f64, formant_scale: f64) -> Self {
        Self {
            f0,
            formant_scale,
            tilt_db_per_octave: -9.0,
            breathiness: 0.02,
        }
    }

    /// `n` distinct speakers: F0 log-spaced over 95-230 Hz, vocal-tract factor
    /// loosely tied to F0 with a seeded offset, tilt and breathiness seeded.
    pub fn roster(n: usize, seed: u64) -> Vec<SpeakerProfile> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5EED_5BEA);
        let mut scales: Vec<f64> = (0..n)
            .map(|i| 0.88 + 0.30 * i as f64 / (n.max(2) - 1) as f64)
            .collect();
        // partial shuffle keeps a loose F0/tract correlation
        for i in (1..n).step_by(2) {
            if rng.random::<bool>() {
                scales.swap(i - 1, i);
            }
        }
        (0..n)
            .map(|i| {
                let frac = i as f64 / (n.max(2) - 1) as f64;
                SpeakerProfile {
                    f0: 95.0 * (230.0f64 / 95.0).powf(frac),
                    formant_scale: scales[i],
                    tilt_db_per_octave: rng.random_range(-12.0..-7.0),
                    breathiness: rng.random_range(0.01..0.05),
                }
            })
            .collect()
    }
}

/// Deterministic prosodic modification applied for an emotion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmotionStyle {
    pub pitch: f64,
    pub pitch_range: f64,
    pub energy: f64,
    pub rate: f64,
    pub jitter: f64,
}

impl EmotionStyle {
    pub fn of(emotion: Emotion) -> Self {
        let (pitch, pitch_range, energy, rate, jitter) = match emotion {
            Emotion::Neutral => (1.00, 0.05, 1.0, 1.00, 0.002),
            Emotion::Angry => (1.20, 0.16, 1.6, 1.12, 0.004),
            Emotion::Happy => (1.15, 0.22, 1.3, 1.08, 0.003),
            Emotion::Sad => (0.92, 0.04, 0.6, 0.86, 0.002),
            Emotion::Fearful => (1.22, 0.12, 0.85, 1.15, 0.012),
            Emotion::Disgust => (0.95, 0.09, 0.9, 0.90, 0.004),
        };
        Self {
            pitch,
            pitch_range,
            energy,
            rate,
            jitter,
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Consonant {
    None,
    S,
    Sh,
    F,
    Stop,
}

#[derive(Debug, Clone, Copy)]
struct Syllable {
    consonant: Consonant,
    vowel: usize,
    vowel_ms: f64,
    consonant_ms: f64,
    accent: f64,
}

/// F1-F4 for eight vowels, Hz, for a reference adult tract.
const VOWELS: [[f64; 4]; 8] = [
    [270.0, 2290.0, 3010.0, 3600.0],
    [390.0, 1990.0, 2550.0, 3500.0],
    [530.0, 1840.0, 2480.0, 3500.0],
    [660.0, 1720.0, 2410.0, 3500.0],
    [730.0, 1090.0, 2440.0, 3400.0],
    [570.0, 840.0, 2410.0, 3400.0],
    [440.0, 1020.0, 2240.0, 3300.0],
    [300.0, 870.0, 2240.0, 3300.0],
];
const FORMANT_BANDWIDTHS: [f64; 4] = [70.0, 100.0, 130.0, 170.0];

fn phrase(utterance: usize) -> Vec<Syllable> {
    let mut rng = ChaCha8Rng::seed_from_u64(0xF4_A5E0 + utterance as u64);
    let n = 4;
    (0..n)
        .map(|_| {
            let consonant = match rng.random_range(0..6) {
                0 | 1 => Consonant::None,
                2 => Consonant::S,
                3 => Consonant::Sh,
                4 => Consonant::F,
                _ => Consonant::Stop,
            };
            Syllable {
                consonant,
                vowel: rng.random_range(0..VOWELS.len()),
                vowel_ms: rng.random_range(110.0..160.0),
                consonant_ms: rng.random_range(35.0..55.0),
                accent: rng.random_range(-1.0..1.0),
            }
        })
        .collect()
}

/// Magnitude of a cascade of second-order resonators at `f`, unity at DC.
fn tract_gain(f: f64, formants: &[f64; 4]) -> f64 {
    formants
        .iter()
        .zip(FORMANT_BANDWIDTHS)
        .map(|(&fc, bw)| {
            let d = fc * fc - f * f;
            fc * fc / (d * d + (bw * f) * (bw * f)).sqrt()
        })
        .product()
}

/// RBJ band-pass biquad (constant 0 dB peak gain), applied in place.
fn bandpass(x: &mut [f64], center: f64, q: f64, rate: f64) {
    let w0 = 2.0 * PI * center / rate;
    let alpha = w0.sin() / (2.0 * q);
    let a0 = 1.0 + alpha;
    let (b0, b2) = (alpha / a0, -alpha / a0);
    let (a1, a2) = (-2.0 * w0.cos() / a0, (1.0 - alpha) / a0);
    let (mut x1, mut x2, mut y1, mut y2) = (0.0, 0.0, 0.0, 0.0);
    for s in x.iter_mut() {
        let y = b0 * *s + b2 * x2 - a1 * y1 - a2 * y2;
        x2 = x1;
        x1 = *s;
        y2 = y1;
        y1 = y;
        *s = y;
    }
}

fn ramp(i: usize, len: usize, ramp_len: usize) -> f64 {
    let r = ramp_len.min(len / 2).max(1);
    let edge = i.min(len - 1 - i);
    if edge >= r {
        1.0
    } else {
        0.5 - 0.5 * (PI * edge as f64 / r as f64).cos()
    }
}

/// Synthesises one utterance at the pipeline rate.
///
/// `variant` seeds the small per-recording perturbations (timing, F0 offset,
/// noise floor); speaker, emotion and utterance index fix everything else.
pub fn synth_utterance(
    speaker: &SpeakerProfile,
    emotion: Emotion,
    utterance: usize,
    variant: u64,
) -> AudioSignal {
    let rate = PIPELINE_RATE as f64;
    let style = EmotionStyle::of(emotion);
    let mut rng = ChaCha8Rng::seed_from_u64(variant);
    let syllables = phrase(utterance);

    let timing = rng.random_range(0.95..1.05) / style.rate;
    let lead_ms = 40.0;
    let mut total_ms = 2.0 * lead_ms
        + syllables
            .iter()
            .map(|s| (s.vowel_ms + if matches!(s.consonant, Consonant::None) { 0.0 } else { s.consonant_ms }) * timing)
            .sum::<f64>();
    let squeeze = (MAX_UTTERANCE_SECS * 1000.0 / total_ms).min(1.0);
    total_ms *= squeeze;
    let n_total = (total_ms * rate / 1000.0) as usize;
    let mut out = vec![0.0; n_total];

    let f0_offset = 1.0 + rng.random_range(-0.015..0.015);
    let base_f0 = speaker.f0 * style.pitch * f0_offset;
    let source_exp = speaker.tilt_db_per_octave / (20.0 * 2f64.log10());

    let mut cursor = (lead_ms * squeeze * rate / 1000.0) as usize;
    let n_syl = syllables.len();
    let mut phase = 0.0f64;
    let mut jitter_state = 0.0f64;
    let mut prev_formants = VOWELS[syllables[0].vowel];

    for (si, syl) in syllables.iter().enumerate() {
        // unvoiced onset
        if !matches!(syl.consonant, Consonant::None) {
            let len = (syl.consonant_ms * timing * squeeze * rate / 1000.0) as usize;
            let len = len.min(n_total.saturating_sub(cursor));
            let mut noise: Vec<f64> = (0..len).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let (gain, active) = match syl.consonant {
                Consonant::S => {
                    bandpass(&mut noise, 5200.0 * speaker.formant_scale, 2.0, rate);
                    (0.35, len)
                }
                Consonant::Sh => {
                    bandpass(&mut noise, 2800.0 * speaker.formant_scale, 2.5, rate);
                    (0.4, len)
                }
                Consonant::F => (0.08, len),
                _ => {
                    bandpass(&mut noise, 3500.0 * speaker.formant_scale, 1.0, rate);
                    (0.5, (0.3 * len as f64) as usize)
                }
            };
            for (i, v) in noise.iter().enumerate().take(active) {
                out[cursor + i] += gain * v * ramp(i, active, 80);
            }
            cursor += len;
        }

        // voiced nucleus
        let len = (syl.vowel_ms * timing * squeeze * rate / 1000.0) as usize;
        let len = len.min(n_total.saturating_sub(cursor));
        let target = VOWELS[syl.vowel];
        let glide = (0.03 * rate) as usize;
        let mut amps: Vec<f64> = Vec::new();
        let mut f0 = base_f0;
        for i in 0..len {
            let pos = (si as f64 + i as f64 / len.max(1) as f64) / n_syl as f64;
            if i % 16 == 0 {
                // declination plus per-syllable accent, centred on the base F0
                let contour = 0.5 - pos + 0.6 * syl.accent * (PI * i as f64 / len as f64).sin();
                jitter_state = 0.9 * jitter_state + style.jitter * rng.sample::<f64, _>(StandardNormal);
                f0 = base_f0 * (1.0 + style.pitch_range * contour + jitter_state);
                let mix = (i as f64 / glide as f64).min(1.0);
                let mut formants = [0.0; 4];
                for k in 0..4 {
                    formants[k] = speaker.formant_scale * (prev_formants[k] * (1.0 - mix) + target[k] * mix);
                }
                let n_harm = (7600.0 / f0) as usize;
                amps.clear();
                amps.extend((1..=n_harm).map(|h| {
                    let fh = h as f64 * f0;
                    (h as f64).powf(source_exp) * tract_gain(fh, &formants)
                }));
            }
            phase += 2.0 * PI * f0 / rate;
            if phase > 2.0 * PI {
                phase -= 2.0 * PI;
            }
            let voiced: f64 = amps
                .iter()
                .enumerate()
                .map(|(h, a)| a * ((h + 1) as f64 * phase).sin())
                .sum();
            let aspiration = speaker.breathiness * rng.sample::<f64, _>(StandardNormal);
            out[cursor + i] += (voiced + aspiration) * ramp(i, len, 240);
        }
        prev_formants = target;
        cursor += len;
    }

    let level = BASE_RMS * style.energy / super::rms(&out).max(1e-12);
    let floor = BASE_RMS * 10f64.powf(FLOOR_DB / 20.0);
    let samples = out
        .into_iter()
        .map(|s| (s * level + floor * rng.sample::<f64, _>(StandardNormal)).clamp(-1.0, 1.0))
        .collect();
    AudioSignal::new(samples, PIPELINE_RATE).expect("synthesis produces finite samples")
}

/// Families of synthetic interference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    White,
    Pink,
    Brown,
    Hum,
    Babble,
}

impl NoiseKind {
    pub const ALL: [NoiseKind; 5] = [
        NoiseKind::White,
        NoiseKind::Pink,
        NoiseKind::Brown,
        NoiseKind::Hum,
        NoiseKind::Babble,
    ];

    pub fn parse(s: &str) -> Result<Self> {
        NoiseKind::ALL
            .into_iter()
            .find(|k| format!("{k:?}").eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Config(format!("unknown noise kind {s:?}")))
    }
}

/// Generates `len` samples of noise at the pipeline rate with unit RMS.
pub fn noise(kind: NoiseKind, len: usize, seed: u64) -> AudioSignal {
    let rate = PIPELINE_RATE as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut white = || rng.sample::<f64, _>(StandardNormal);
    let samples: Vec<f64> = match kind {
        NoiseKind::White => (0..len).map(|_| white()).collect(),
        NoiseKind::Pink => {
            // Kellet's refined pink filter
            let mut b = [0.0f64; 7];
            (0..len)
                .map(|_| {
                    let w = white();
                    b[0] = 0.99886 * b[0] + w * 0.0555179;
                    b[1] = 0.99332 * b[1] + w * 0.0750759;
                    b[2] = 0.96900 * b[2] + w * 0.1538520;
                    b[3] = 0.86650 * b[3] + w * 0.3104856;
                    b[4] = 0.55000 * b[4] + w * 0.5329522;
                    b[5] = -0.7616 * b[5] - w * 0.0168980;
                    let y = b[..6].iter().sum::<f64>() + b[6] + w * 0.5362;
                    b[6] = w * 0.115926;
                    y
                })
                .collect()
        }
        NoiseKind::Brown => {
            let mut y = 0.0;
            (0..len)
                .map(|_| {
                    y = 0.995 * y + 0.1 * white();
                    y
                })
                .collect()
        }
        NoiseKind::Hum => {
            let base = 50.0 + 20.0 * (seed % 3) as f64;
            (0..len)
                .map(|i| {
                    let t = i as f64 / rate;
                    (1..=12)
                        .map(|h| (2.0 * PI * base * h as f64 * t + h as f64).sin() / h as f64)
                        .sum::<f64>()
                        + 0.1 * white()
                })
                .collect()
        }
        NoiseKind::Babble => {
            let talkers = SpeakerProfile::roster(6, seed ^ 0xBAB);
            let mut acc = vec![0.0; len];
            for (i, talker) in talkers.iter().enumerate().take(4) {
                let mut pos = 0;
                let mut utt = (seed as usize).wrapping_mul(7).wrapping_add(i * 13);
                while pos < len {
                    let v = synth_utterance(talker, Emotion::Neutral, 1000 + utt % 97, seed.wrapping_add(utt as u64));
                    for (a, s) in acc[pos..].iter_mut().zip(v.samples()) {
                        *a += s;
                    }
                    pos += v.len();
                    utt += 1;
                }
            }
            acc
        }
    };
    let r = super::rms(&samples).max(1e-12);
    AudioSignal::new(samples.into_iter().map(|s| s / r).collect(), PIPELINE_RATE)
        .expect("noise generators produce finite samples")
}

/// A corpus held in memory: manifest rows paired with their signals.
#[derive(Debug, Clone)]
pub struct Corpus {
    pub manifest: CorpusManifest,
    pub signals: Vec<AudioSignal>,
}

impl Corpus {
    /// Loads every manifest entry from disk, resampling to the pipeline rate.
    pub fn load(manifest: CorpusManifest) -> Result<Self> {
        let signals = manifest
            .entries
            .iter()
            .map(|e| super::read_wav(&e.path).and_then(|s| s.to_pipeline_rate()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { manifest, signals })
    }
}

/// Generates `n_speakers × emotions × utterances` clean utterances in memory.
/// Paths are relative names of the form `clean/spk00_angry_00.wav`.
pub fn generate_corpus(
    n_speakers: usize,
    emotions: &[Emotion],
    utterances: usize,
    seed: u64,
) -> Result<Corpus> {
    if n_speakers < 2 {
        return Err(Error::Config("a corpus needs at least two speakers".into()));
    }
    let roster = SpeakerProfile::roster(n_speakers, seed);
    let mut entries = Vec::new();
    let mut signals = Vec::new();
    for (s, profile) in roster.iter().enumerate() {
        for &emotion in emotions {
            for u in 0..utterances {
                let variant = seed
                    .wrapping_mul(1_000_003)
                    .wrapping_add((s * 10_007 + emotion as usize * 101 + u) as u64);
                signals.push(synth_utterance(profile, emotion, u, variant));
                entries.push(ManifestEntry {
                    path: format!("clean/spk{s:02}_{emotion}_{u:02}.wav").into(),
                    speaker: s,
                    emotion,
                    condition: Condition::Clean,
                });
            }
        }
    }
    Ok(Corpus {
        manifest: CorpusManifest::new(entries),
        signals,
    })
}

/// Writes a synthetic corpus under `out_dir` (WAVs plus `manifest.csv`) and
/// returns its manifest with absolute paths.
pub fn synth_corpus(
    n_speakers: usize,
    emotions: &[Emotion],
    utterances: usize,
    seed: u64,
    out_dir: &Path,
) -> Result<CorpusManifest> {
    let mut corpus = generate_corpus(n_speakers, emotions, utterances, seed)?;
    fs::create_dir_all(out_dir.join("clean"))?;
    for (entry, signal) in corpus.manifest.entries.iter_mut().zip(&corpus.signals) {
        entry.path = out_dir.join(&entry.path);
        write_wav(&entry.path, signal)?;
    }
    corpus.manifest.write_csv(out_dir.join("manifest.csv"))?;
    Ok(corpus.manifest)
}

/// Seeded shuffle helper shared by corpus-level tools.
pub(crate) fn shuffled<T: Clone>(items: &[T], seed: u64) -> Vec<T> {
    let mut v = items.to_vec();
    v.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    v
}
