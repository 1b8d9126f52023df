//! Framed subband energies, binary T-F masks and masked re-synthesis.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::tree::{synthesize, Subbands, WptTree};
use crate::audio::AudioSignal;
use crate::error::{Error, Result};

pub const DEFAULT_FRAME_LEN: usize = 320;
pub const DEFAULT_HOP: usize = 160;

/// Periodic Hamming window. With a hop of half the length its shifted copies
/// sum to the constant 1.08.
pub fn hamming(len: usize) -> Vec<f64> {
    (0..len)
        .map(|n| 0.54 - 0.46 * (2.0 * PI * n as f64 / len as f64).cos())
        .collect()
}

/// Number of complete frames in a signal of length `n`.
pub fn frame_count(n: usize, frame_len: usize, hop: usize) -> usize {
    if n < frame_len {
        0
    } else {
        (n - frame_len) / hop + 1
    }
}

/// Per-channel framing of a subband decomposition.
#[derive(Debug, Clone)]
pub struct Cochleagram {
    subbands: Subbands,
    energies: Vec<Vec<f64>>,
    frame_len: usize,
    hop: usize,
    window: Vec<f64>,
}

/// Frames every channel with a Hamming window and records its energy.
pub fn cochleagram(subbands: &Subbands, frame_len: usize, hop: usize) -> Result<Cochleagram> {
    if frame_len == 0 || hop == 0 {
        return Err(Error::Domain("frame length and hop must be positive".into()));
    }
    let frames = frame_count(subbands.len(), frame_len, hop);
    if frames == 0 {
        return Err(Error::DegenerateInput(format!(
            "signal of {} samples is shorter than one {frame_len}-sample frame",
            subbands.len()
        )));
    }
    let window = hamming(frame_len);
    let energies = (0..subbands.n_channels())
        .map(|c| {
            let x = subbands.channel(c);
            (0..frames)
                .map(|t| {
                    let seg = &x[t * hop..t * hop + frame_len];
                    seg.iter().zip(&window).map(|(s, w)| (s * w) * (s * w)).sum()
                })
                .collect()
        })
        .collect();
    Ok(Cochleagram {
        subbands: subbands.clone(),
        energies,
        frame_len,
        hop,
        window,
    })
}

impl Cochleagram {
    pub fn n_channels(&self) -> usize {
        self.energies.len()
    }

    pub fn n_frames(&self) -> usize {
        self.energies.first().map_or(0, Vec::len)
    }

    pub fn frame_len(&self) -> usize {
        self.frame_len
    }

    pub fn hop(&self) -> usize {
        self.hop
    }

    pub fn window(&self) -> &[f64] {
        &self.window
    }

    /// `energies()[c][t]`: windowed energy of channel `c` in frame `t`.
    pub fn energies(&self) -> &[Vec<f64>] {
        &self.energies
    }

    pub fn energy(&self, channel: usize, frame: usize) -> f64 {
        self.energies[channel][frame]
    }

    pub fn subbands(&self) -> &Subbands {
        &self.subbands
    }

    /// Raw (unwindowed) samples of channel `c` in frame `t`.
    pub fn frame(&self, channel: usize, frame: usize) -> &[f64] {
        let start = frame * self.hop;
        &self.subbands.channel(channel)[start..start + self.frame_len]
    }

    /// Energies as a `channels × frames` row-major matrix in dB with a floor.
    pub fn energies_db(&self) -> Vec<Vec<f64>> {
        self.energies
            .iter()
            .map(|row| row.iter().map(|e| 10.0 * e.max(1e-10).log10()).collect())
            .collect()
    }
}

/// Binary channel × frame mask.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TFMask {
    channels: usize,
    frames: usize,
    data: Vec<u8>,
}

impl TFMask {
    pub fn filled(channels: usize, frames: usize, value: bool) -> Self {
        Self {
            channels,
            frames,
            data: vec![value as u8; channels * frames],
        }
    }

    pub fn zeros(channels: usize, frames: usize) -> Self {
        Self::filled(channels, frames, false)
    }

    pub fn ones(channels: usize, frames: usize) -> Self {
        Self::filled(channels, frames, true)
    }

    /// Builds a mask from rows of 0/1 values.
    pub fn from_rows(rows: &[Vec<u8>]) -> Result<Self> {
        let channels = rows.len();
        let frames = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != frames) {
            return Err(Error::Shape("mask rows differ in length".into()));
        }
        if rows.iter().flatten().any(|&v| v > 1) {
            return Err(Error::Domain("mask values must be 0 or 1".into()));
        }
        Ok(Self {
            channels,
            frames,
            data: rows.concat(),
        })
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn get(&self, channel: usize, frame: usize) -> bool {
        self.data[channel * self.frames + frame] == 1
    }

    pub fn set(&mut self, channel: usize, frame: usize, value: bool) {
        self.data[channel * self.frames + frame] = value as u8;
    }

    pub fn row(&self, channel: usize) -> &[u8] {
        &self.data[channel * self.frames..(channel + 1) * self.frames]
    }

    pub fn count_ones(&self) -> usize {
        self.data.iter().filter(|&&v| v == 1).count()
    }

    pub fn rows(&self) -> Vec<Vec<u8>> {
        (0..self.channels).map(|c| self.row(c).to_vec()).collect()
    }
}

/// Scales each T-F unit of the mixture by its mask value and resynthesizes.
///
/// Frame gains are spread over samples with the analysis window and divided
/// by the window overlap sum, so a constant mask is applied exactly. Samples
/// past the last complete frame follow the last frame's decision.
pub fn apply_mask_and_resynthesize(
    coch: &Cochleagram,
    mask: &TFMask,
    tree: &WptTree,
) -> Result<AudioSignal> {
    if mask.channels() != coch.n_channels() || mask.frames() != coch.n_frames() {
        return Err(Error::Shape(format!(
            "mask is {}x{}, cochleagram is {}x{}",
            mask.channels(),
            mask.frames(),
            coch.n_channels(),
            coch.n_frames()
        )));
    }
    let mut masked = coch.subbands.clone();
    let padded = masked.padded_len();
    let frames = coch.n_frames();
    let covered = (frames - 1) * coch.hop + coch.frame_len;

    let mut norm = vec![0.0; covered];
    for t in 0..frames {
        for (i, w) in coch.window.iter().enumerate() {
            norm[t * coch.hop + i] += w;
        }
    }

    let mut gain = vec![0.0; padded];
    for c in 0..masked.n_channels() {
        gain.iter_mut().for_each(|g| *g = 0.0);
        for t in 0..frames {
            if mask.get(c, t) {
                for (i, w) in coch.window.iter().enumerate() {
                    gain[t * coch.hop + i] += w;
                }
            }
        }
        for (g, n) in gain.iter_mut().zip(&norm) {
            *g /= n;
        }
        let tail = if mask.get(c, frames - 1) { 1.0 } else { 0.0 };
        for g in &mut gain[covered..] {
            *g = tail;
        }
        for (x, g) in masked.padded_channel_mut(c).iter_mut().zip(&gain) {
            *x *= g;
        }
    }
    synthesize(&masked, tree)
}
