//! Per-channel, per-frame raw features: amplitude-modulation spectrum (PCA
//! reduced), RASTA-PLP cepstra, MFCCs and pitch.

mod ams;
mod mel;
mod pca;
mod pitch;
mod rasta;

use std::sync::Arc;

use rustfft::{num_complex::Complex, Fft, FftPlanner};
use serde::{Deserialize, Serialize};

pub use ams::{
    analytic_signal, analytic_signal_with, decimated_envelope, decimated_envelope_with, modulation_decomposition,
    modulation_decomposition_with, modulation_frequencies, ModulationAnalyzer,
    ModulationDecomposition, ENVELOPE_DECIMATION, ENVELOPE_RATE, MODULATION_BINS, MODULATION_CONTEXT,
};
pub use mel::{
    dct_ortho, idct_ortho, mel, mel_to_hz, mfcc_from_power, MelFilterbank, CLASSIC_MEL_DIVISOR, DEFAULT_MEL_DIVISOR,
    LOG_FLOOR,
};
pub use pca::Pca;
pub use pitch::{pitch, PitchConfig};
pub use rasta::{
    autocorrelation_from_spectrum, bark_to_hz, hz_to_bark, levinson, lpc_to_cepstrum, rasta_filter, PlpAnalyzer,
    RASTA_NUMERATOR, RASTA_POLE,
};

use crate::filterbank::{hamming, Cochleagram};
use crate::error::{Error, Result};

pub const AMS_DIM: usize = 38;
pub const RASTA_DIM: usize = 13;
pub const MFCC_DIM: usize = 13;
pub const PITCH_DIM: usize = 1;
/// Length of the concatenated raw feature vector.
pub const RAW_DIM: usize = AMS_DIM + RASTA_DIM + MFCC_DIM + PITCH_DIM;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureConfig {
    pub mel_divisor: f64,
    pub mel_filters: usize,
    pub mel_low_hz: f64,
    pub mel_high_hz: f64,
    pub fft_len: usize,
    pub lpc_order: usize,
    pub pitch: PitchConfig,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            mel_divisor: DEFAULT_MEL_DIVISOR,
            mel_filters: 26,
            mel_low_hz: 50.0,
            mel_high_hz: 8000.0,
            fft_len: 512,
            lpc_order: 12,
            pitch: PitchConfig::default(),
        }
    }
}

/// One channel-frame's feature vector, split by kind.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureFrame {
    pub ams: Vec<f64>,
    pub rasta_plp: Vec<f64>,
    pub mfcc: Vec<f64>,
    /// Hz, 0 when unvoiced.
    pub pitch: f64,
    pub channel: usize,
    pub frame: usize,
}

impl FeatureFrame {
    /// AMS, RASTA-PLP, MFCC, pitch concatenated.
    pub fn to_vector(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(RAW_DIM);
        v.extend_from_slice(&self.ams);
        v.extend_from_slice(&self.rasta_plp);
        v.extend_from_slice(&self.mfcc);
        v.push(self.pitch);
        v
    }
}

/// Features of one channel before the AMS reduction.
#[derive(Debug, Clone)]
pub struct ChannelFeatures {
    /// Modulation spectrum per frame ([`MODULATION_BINS`] values).
    pub ams_spectrum: Vec<Vec<f64>>,
    pub rasta_plp: Vec<Vec<f64>>,
    pub mfcc: Vec<Vec<f64>>,
}

/// Everything extracted from one mixture cochleagram.
#[derive(Debug, Clone)]
pub struct MixtureFeatures {
    pub channels: Vec<ChannelFeatures>,
    /// Mixture-level pitch per frame, shared by all channels.
    pub pitch: Vec<f64>,
}

impl MixtureFeatures {
    pub fn n_frames(&self) -> usize {
        self.pitch.len()
    }

    /// Channel `c`'s frames with the AMS spectrum projected through `pca`.
    pub fn frames(&self, c: usize, pca: &Pca) -> Result<Vec<FeatureFrame>> {
        let ch = &self.channels[c];
        (0..self.n_frames())
            .map(|t| {
                Ok(FeatureFrame {
                    ams: pca.project(&ch.ams_spectrum[t])?,
                    rasta_plp: ch.rasta_plp[t].clone(),
                    mfcc: ch.mfcc[t].clone(),
                    pitch: self.pitch[t],
                    channel: c,
                    frame: t,
                })
            })
            .collect()
    }

    /// [`MixtureFeatures::frames`] flattened to [`RAW_DIM`]-long vectors.
    pub fn vectors(&self, c: usize, pca: &Pca) -> Result<Vec<Vec<f64>>> {
        Ok(self.frames(c, pca)?.iter().map(FeatureFrame::to_vector).collect())
    }
}

/// Reusable extraction state (FFT plan, filterbanks).
pub struct FeatureExtractor {
    cfg: FeatureConfig,
    fft: Arc<dyn Fft<f64>>,
    mel_bank: MelFilterbank,
    plp: PlpAnalyzer,
    modulation: ModulationAnalyzer,
    sample_rate: f64,
}

impl FeatureExtractor {
    pub fn new(cfg: &FeatureConfig, sample_rate: u32) -> Result<Self> {
        let fs = sample_rate as f64;
        if cfg.fft_len < 2 || cfg.lpc_order == 0 {
            return Err(Error::Config("fft_len must be ≥ 2 and lpc_order ≥ 1".into()));
        }
        let mel_bank = MelFilterbank::new(
            cfg.mel_filters,
            cfg.fft_len,
            fs,
            cfg.mel_low_hz,
            cfg.mel_high_hz.min(fs / 2.0),
            cfg.mel_divisor,
        )?;
        if cfg.mel_filters < MFCC_DIM {
            return Err(Error::Config(format!("need at least {MFCC_DIM} mel filters")));
        }
        Ok(Self {
            cfg: cfg.clone(),
            fft: FftPlanner::new().plan_fft_forward(cfg.fft_len),
            mel_bank,
            plp: PlpAnalyzer::new(cfg.fft_len, fs, cfg.lpc_order),
            modulation: ModulationAnalyzer::new(),
            sample_rate: fs,
        })
    }

    pub fn config(&self) -> &FeatureConfig {
        &self.cfg
    }

    /// One-sided periodogram `|FFT|² / fft_len` of a zero-padded frame.
    pub fn power_spectrum(&self, frame: &[f64]) -> Vec<f64> {
        let n = self.cfg.fft_len;
        let mut buf: Vec<Complex<f64>> = (0..n)
            .map(|i| Complex::new(frame.get(i).copied().unwrap_or(0.0), 0.0))
            .collect();
        self.fft.process(&mut buf);
        buf[..n / 2 + 1].iter().map(|z| z.norm_sqr() / n as f64).collect()
    }

    /// 13 MFCCs of an already-windowed frame.
    pub fn mfcc(&self, windowed: &[f64]) -> Vec<f64> {
        mfcc_from_power(&self.mel_bank, &self.power_spectrum(windowed), MFCC_DIM)
    }

    /// RASTA-PLP cepstra for a sequence of power spectra (one per frame).
    pub fn rasta_plp(&self, powers: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let bands: Vec<Vec<f64>> = powers.iter().map(|p| self.plp.log_bands(p)).collect();
        let nb = self.plp.n_bands();
        let mut filtered = vec![vec![0.0; nb]; bands.len()];
        for b in 0..nb {
            let traj: Vec<f64> = bands.iter().map(|f| f[b]).collect();
            for (row, v) in filtered.iter_mut().zip(rasta_filter(&traj)) {
                row[b] = v;
            }
        }
        filtered.iter().map(|f| self.plp.cepstra(f)).collect()
    }

    /// Raw features for every channel and frame of `coch`. `mixture` is the
    /// full-band signal the cochleagram was computed from (used for pitch).
    pub fn extract(&self, coch: &Cochleagram, mixture: &[f64]) -> MixtureFeatures {
        let frames = coch.n_frames();
        let frame_len = coch.frame_len();
        let hop = coch.hop();
        let window = hamming(frame_len);
        let centers: Vec<usize> = (0..frames).map(|t| t * hop + frame_len / 2).collect();

        let pcfg = &self.cfg.pitch;
        let half = pcfg.frame_len / 2;
        let pitch = centers
            .iter()
            .map(|&c| {
                let seg: Vec<f64> = (0..pcfg.frame_len)
                    .map(|i| {
                        (c + i)
                            .checked_sub(half)
                            .and_then(|j| mixture.get(j))
                            .copied()
                            .unwrap_or(0.0)
                    })
                    .collect();
                pitch(&seg, self.sample_rate, pcfg)
            })
            .collect();

        let env_centers: Vec<usize> = centers.iter().map(|c| c / ENVELOPE_DECIMATION).collect();
        let mut planner = FftPlanner::new();
        let channels = (0..coch.n_channels())
            .map(|c| {
                let env = decimated_envelope_with(&mut planner, coch.subbands().channel(c));
                let ams_spectrum = self.modulation.spectra(&env, &env_centers);
                let powers: Vec<Vec<f64>> = (0..frames)
                    .map(|t| {
                        let w: Vec<f64> = coch.frame(c, t).iter().zip(&window).map(|(x, w)| x * w).collect();
                        self.power_spectrum(&w)
                    })
                    .collect();
                let mfcc = powers
                    .iter()
                    .map(|p| mfcc_from_power(&self.mel_bank, p, MFCC_DIM))
                    .collect();
                ChannelFeatures {
                    ams_spectrum,
                    rasta_plp: self.rasta_plp(&powers),
                    mfcc,
                }
            })
            .collect();
        MixtureFeatures { channels, pitch }
    }
}
