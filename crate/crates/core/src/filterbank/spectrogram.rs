//! Log-magnitude short-time Fourier analysis.

use rustfft::{num_complex::Complex, FftPlanner};

use super::cochleagram::{frame_count, hamming};
use crate::audio::AudioSignal;

pub const SPEC_WINDOW: usize = 256;
pub const SPEC_HOP: usize = 128;
pub const LOG_FLOOR: f64 = 1e-10;

/// `bins × frames` matrix of log10 magnitudes, stored bin-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    bins: usize,
    frames: usize,
    data: Vec<f64>,
}

impl Spectrogram {
    pub fn from_parts(bins: usize, frames: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), bins * frames);
        Self { bins, frames, data }
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn get(&self, bin: usize, frame: usize) -> f64 {
        self.data[bin * self.frames + frame]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.frames.max(1)).map(<[f64]>::to_vec).collect()
    }
}

/// Hamming-windowed STFT (256 / 128) with `log10(max(|X|, 1e-10))` entries.
/// Signals shorter than one window are zero-padded to a single frame.
pub fn spectrogram(sig: &AudioSignal) -> Spectrogram {
    spectrogram_with(sig.samples(), SPEC_WINDOW, SPEC_HOP)
}

pub fn spectrogram_with(x: &[f64], window_len: usize, hop: usize) -> Spectrogram {
    let window = hamming(window_len);
    let frames = frame_count(x.len(), window_len, hop).max(1);
    let bins = window_len / 2 + 1;
    let fft = FftPlanner::new().plan_fft_forward(window_len);
    let mut data = vec![0.0; bins * frames];
    let mut buf = vec![Complex::new(0.0, 0.0); window_len];
    for t in 0..frames {
        for (i, (b, w)) in buf.iter_mut().zip(&window).enumerate() {
            let v = x.get(t * hop + i).copied().unwrap_or(0.0);
            *b = Complex::new(v * w, 0.0);
        }
        fft.process(&mut buf);
        for k in 0..bins {
            data[k * frames + t] = buf[k].norm().max(LOG_FLOOR).log10();
        }
    }
    Spectrogram { bins, frames, data }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn frame_count_for_1024_samples() {
        let s = spectrogram(&AudioSignal::zeros(1024, 16_000));
        assert_eq!((s.bins(), s.frames()), (129, 7));
    }

    #[test]
    fn zero_signal_sits_at_floor() {
        let s = spectrogram(&AudioSignal::zeros(1024, 16_000));
        assert!(s.data().iter().all(|&v| v == -10.0));
    }

    #[test]
    fn one_khz_tone_peaks_at_bin_16() {
        let x: Vec<f64> = (0..4096).map(|i| (2.0 * PI * 1000.0 * i as f64 / 16_000.0).sin()).collect();
        let s = spectrogram(&AudioSignal::new(x, 16_000).unwrap());
        for t in 0..s.frames() {
            let peak = (0..s.bins())
                .max_by(|&a, &b| s.get(a, t).total_cmp(&s.get(b, t)))
                .unwrap();
            assert_eq!(peak, 16);
        }
    }
}
