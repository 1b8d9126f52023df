//! Mel scale, triangular Mel filterbank and MFCCs.

use crate::error::{Error, Result};

/// Divisor of the Mel formula as used throughout this crate.
pub const DEFAULT_MEL_DIVISOR: f64 = 100.0;
/// The conventional divisor found in most toolkits.
pub const CLASSIC_MEL_DIVISOR: f64 = 700.0;

/// `M(f) = 1125 · ln(1 + f / divisor)`.
pub fn mel(f: f64, divisor: f64) -> Result<f64> {
    if !(f >= 0.0) {
        return Err(Error::Domain(format!("frequency must be non-negative, got {f}")));
    }
    Ok(1125.0 * (f / divisor).ln_1p())
}

pub fn mel_to_hz(m: f64, divisor: f64) -> f64 {
    divisor * (m / 1125.0).exp_m1()
}

/// Triangular filters equally spaced on the Mel scale, weights evaluated at
/// the FFT bin frequencies.
#[derive(Debug, Clone, PartialEq)]
pub struct MelFilterbank {
    /// `n_filters × n_bins`, row-major.
    weights: Vec<f64>,
    n_filters: usize,
    n_bins: usize,
    centers: Vec<f64>,
}

impl MelFilterbank {
    pub fn new(
        n_filters: usize,
        fft_len: usize,
        sample_rate: f64,
        low_hz: f64,
        high_hz: f64,
        divisor: f64,
    ) -> Result<Self> {
        if n_filters == 0 || !(high_hz > low_hz) {
            return Err(Error::Config("mel filterbank needs filters and a positive band".into()));
        }
        let lo = mel(low_hz, divisor)?;
        let hi = mel(high_hz, divisor)?;
        let edges: Vec<f64> = (0..n_filters + 2)
            .map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / (n_filters + 1) as f64, divisor))
            .collect();
        let n_bins = fft_len / 2 + 1;
        let mut weights = vec![0.0; n_filters * n_bins];
        for j in 0..n_filters {
            let (l, c, r) = (edges[j], edges[j + 1], edges[j + 2]);
            for k in 0..n_bins {
                let f = k as f64 * sample_rate / fft_len as f64;
                let w = if f > l && f <= c {
                    (f - l) / (c - l)
                } else if f > c && f < r {
                    (r - f) / (r - c)
                } else {
                    0.0
                };
                weights[j * n_bins + k] = w;
            }
        }
        Ok(Self {
            weights,
            n_filters,
            n_bins,
            centers: edges[1..=n_filters].to_vec(),
        })
    }

    pub fn n_filters(&self) -> usize {
        self.n_filters
    }

    pub fn center_frequencies(&self) -> &[f64] {
        &self.centers
    }

    /// Filter energies for a one-sided power spectrum of `n_bins` values.
    pub fn apply(&self, power: &[f64]) -> Vec<f64> {
        debug_assert_eq!(power.len(), self.n_bins);
        self.weights
            .chunks(self.n_bins)
            .map(|row| row.iter().zip(power).map(|(w, p)| w * p).sum())
            .collect()
    }
}

/// Orthonormal DCT-II.
pub fn dct_ortho(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    (0..n)
        .map(|k| {
            let scale = if k == 0 { (1.0 / n as f64).sqrt() } else { (2.0 / n as f64).sqrt() };
            scale
                * x.iter()
                    .enumerate()
                    .map(|(i, v)| v * (std::f64::consts::PI * k as f64 * (2 * i + 1) as f64 / (2 * n) as f64).cos())
                    .sum::<f64>()
        })
        .collect()
}

/// Inverse of [`dct_ortho`] (orthonormal DCT-III).
pub fn idct_ortho(c: &[f64]) -> Vec<f64> {
    let n = c.len();
    (0..n)
        .map(|i| {
            c.iter()
                .enumerate()
                .map(|(k, v)| {
                    let scale = if k == 0 { (1.0 / n as f64).sqrt() } else { (2.0 / n as f64).sqrt() };
                    scale * v * (std::f64::consts::PI * k as f64 * (2 * i + 1) as f64 / (2 * n) as f64).cos()
                })
                .sum()
        })
        .collect()
}

pub const LOG_FLOOR: f64 = 1e-10;

/// MFCCs from a one-sided power spectrum: Mel energies, natural log with a
/// floor, orthonormal DCT, first `n_coeffs` kept.
pub fn mfcc_from_power(bank: &MelFilterbank, power: &[f64], n_coeffs: usize) -> Vec<f64> {
    let logs: Vec<f64> = bank.apply(power).iter().map(|e| e.max(LOG_FLOOR).ln()).collect();
    let mut c = dct_ortho(&logs);
    c.truncate(n_coeffs);
    c
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mel_reference_points() {
        assert_eq!(mel(0.0, 100.0).unwrap(), 0.0);
        assert!((mel(100.0, 100.0).unwrap() - 1125.0 * 2f64.ln()).abs() < 1e-9);
        assert!((mel(100.0, 100.0).unwrap() - 779.8).abs() < 0.05);
        assert!(matches!(mel(-1.0, 100.0), Err(Error::Domain(_))));
        assert!((mel_to_hz(mel(1234.0, 700.0).unwrap(), 700.0) - 1234.0).abs() < 1e-9);
    }

    #[test]
    fn dct_round_trip() {
        let x: Vec<f64> = (0..26).map(|i| (i as f64 * 0.37).sin() * 4.0 - 1.0).collect();
        let y = idct_ortho(&dct_ortho(&x));
        assert!(x.iter().zip(&y).all(|(a, b)| (a - b).abs() < 1e-9));
    }

    #[test]
    fn filters_have_increasing_centers() {
        let bank = MelFilterbank::new(26, 512, 16_000.0, 50.0, 8000.0, 100.0).unwrap();
        assert!(bank.center_frequencies().windows(2).all(|w| w[1] > w[0]));
        assert!(bank.center_frequencies()[25] < 8000.0);
    }
}
