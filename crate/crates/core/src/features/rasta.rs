//! RASTA-PLP: Bark-band analysis, band-pass filtering of log trajectories,
//! equal-loudness weighting, cube-root compression, LPC and cepstra.

use super::mel::LOG_FLOOR;

/// RASTA numerator taps on x[n], …, x[n−4].
pub const RASTA_NUMERATOR: [f64; 5] = [0.2, 0.1, 0.0, -0.1, -0.2];
pub const RASTA_POLE: f64 = 0.94;

pub fn hz_to_bark(f: f64) -> f64 {
    6.0 * (f / 600.0).asinh()
}

pub fn bark_to_hz(z: f64) -> f64 {
    600.0 * (z / 6.0).sinh()
}

/// Runs the RASTA band-pass over one trajectory. The filter history starts
/// at the first value, so a constant trajectory maps to exact zeros.
pub fn rasta_filter(x: &[f64]) -> Vec<f64> {
    let Some(&first) = x.first() else {
        return Vec::new();
    };
    let mut hist = [first; 4];
    let mut prev = 0.0;
    x.iter()
        .map(|&v| {
            // antisymmetric taps paired so equal inputs cancel exactly
            let y = RASTA_POLE * prev
                + RASTA_NUMERATOR[0] * (v - hist[3])
                + RASTA_NUMERATOR[1] * (hist[0] - hist[2]);
            hist = [v, hist[0], hist[1], hist[2]];
            prev = y;
            y
        })
        .collect()
}

/// Critical-band weights and equal-loudness curve for one FFT size.
#[derive(Debug, Clone)]
pub struct PlpAnalyzer {
    n_bands: usize,
    n_bins: usize,
    /// `n_bands × n_bins`.
    weights: Vec<f64>,
    loudness: Vec<f64>,
    order: usize,
}

impl PlpAnalyzer {
    pub fn new(fft_len: usize, sample_rate: f64, order: usize) -> Self {
        let n_bins = fft_len / 2 + 1;
        let nyq_bark = hz_to_bark(sample_rate / 2.0);
        let n_bands = nyq_bark.ceil() as usize + 1;
        let step = nyq_bark / (n_bands - 1) as f64;
        let mut weights = vec![0.0; n_bands * n_bins];
        let mut loudness = vec![0.0; n_bands];
        for b in 0..n_bands {
            let mid = b as f64 * step;
            for k in 0..n_bins {
                let z = hz_to_bark(k as f64 * sample_rate / fft_len as f64);
                let lo = z - mid - 0.5;
                let hi = z - mid + 0.5;
                weights[b * n_bins + k] = 10f64.powf(hi.min(-2.5 * lo).min(0.0));
            }
            let fsq = bark_to_hz(mid).powi(2);
            let ftmp = fsq + 1.6e5;
            loudness[b] = (fsq / ftmp).powi(2) * ((fsq + 1.44e6) / (fsq + 9.61e6));
        }
        Self {
            n_bands,
            n_bins,
            weights,
            loudness,
            order,
        }
    }

    pub fn n_bands(&self) -> usize {
        self.n_bands
    }

    /// Log critical-band energies of a one-sided power spectrum.
    pub fn log_bands(&self, power: &[f64]) -> Vec<f64> {
        debug_assert_eq!(power.len(), self.n_bins);
        self.weights
            .chunks(self.n_bins)
            .map(|w| w.iter().zip(power).map(|(a, b)| a * b).sum::<f64>().max(LOG_FLOOR).ln())
            .collect()
    }

    /// Cepstra (`order + 1` values, c0 = log prediction gain) of one frame of
    /// RASTA-filtered log band energies.
    pub fn cepstra(&self, filtered_log: &[f64]) -> Vec<f64> {
        let mut aud: Vec<f64> = filtered_log
            .iter()
            .zip(&self.loudness)
            .map(|(x, l)| (l * x.exp()).powf(1.0 / 3.0))
            .collect();
        let nb = self.n_bands;
        // edge bands are unreliable after loudness weighting
        aud[0] = aud[1];
        aud[nb - 1] = aud[nb - 2];
        let r = autocorrelation_from_spectrum(&aud, self.order + 1);
        let (a, gain) = levinson(&r, self.order);
        lpc_to_cepstrum(&a, gain, self.order + 1)
    }
}

/// Autocorrelation lags 0..n_lags of a real, even spectrum sampled on
/// [0, π] (inverse DFT of its symmetric extension).
pub fn autocorrelation_from_spectrum(spec: &[f64], n_lags: usize) -> Vec<f64> {
    let nb = spec.len();
    let period = 2 * (nb - 1);
    (0..n_lags)
        .map(|lag| {
            let mut s = spec[0] + if lag % 2 == 0 { spec[nb - 1] } else { -spec[nb - 1] };
            for (k, v) in spec.iter().enumerate().take(nb - 1).skip(1) {
                s += 2.0 * v * (2.0 * std::f64::consts::PI * (k * lag) as f64 / period as f64).cos();
            }
            s / period as f64
        })
        .collect()
}

/// Levinson-Durbin: predictor `a[1..=order]` of `A(z) = 1 + Σ a_k z^-k` and
/// the final prediction error.
pub fn levinson(r: &[f64], order: usize) -> (Vec<f64>, f64) {
    let mut a = vec![0.0; order + 1];
    a[0] = 1.0;
    let mut err = r[0];
    if err <= 0.0 {
        return (a, LOG_FLOOR);
    }
    for i in 1..=order {
        let acc: f64 = (0..i).map(|j| a[j] * r[i - j]).sum();
        let k = -acc / err;
        let prev = a.clone();
        for j in 1..i {
            a[j] = prev[j] + k * prev[i - j];
        }
        a[i] = k;
        err *= 1.0 - k * k;
        if err <= LOG_FLOOR {
            err = LOG_FLOOR;
            break;
        }
    }
    (a, err)
}

/// Cepstrum of the all-pole model `gain / A(z)`.
pub fn lpc_to_cepstrum(a: &[f64], gain: f64, n: usize) -> Vec<f64> {
    let p = a.len() - 1;
    let mut c = vec![0.0; n];
    c[0] = gain.max(LOG_FLOOR).ln();
    for m in 1..n {
        let am = if m <= p { a[m] } else { 0.0 };
        let mut s = 0.0;
        for k in 1..m {
            if m - k <= p {
                s += k as f64 * c[k] * a[m - k];
            }
        }
        c[m] = -am - s / m as f64;
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_trajectory_is_rejected() {
        assert!(rasta_filter(&[3.7; 40]).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn impulse_response_sums_to_zero() {
        let mut x = vec![0.0; 2000];
        x[1] = 1.0; // first sample zero so history starts at rest
        let h = rasta_filter(&x);
        assert!(h.iter().sum::<f64>().abs() < 1e-9);
        let energy: f64 = h.iter().map(|v| v * v).sum();
        assert!((energy - 0.245_888).abs() < 1e-4, "{energy}");
    }

    #[test]
    fn levinson_recovers_ar1() {
        // r[k] = ρ^k / (1 − ρ²) for x[n] = ρ x[n−1] + e[n]
        let rho: f64 = 0.8;
        let r: Vec<f64> = (0..4).map(|k| rho.powi(k) / (1.0 - rho * rho)).collect();
        let (a, err) = levinson(&r, 3);
        assert!((a[1] + rho).abs() < 1e-12);
        assert!(a[2].abs() < 1e-12 && a[3].abs() < 1e-12);
        assert!((err - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cepstrum_of_one_pole_model() {
        // ln(1 / (1 − ρ z^-1)) = Σ ρ^n / n z^-n
        let rho: f64 = 0.5;
        let c = lpc_to_cepstrum(&[1.0, -rho], 1.0, 6);
        for (n, v) in c.iter().enumerate().skip(1) {
            assert!((v - rho.powi(n as i32) / n as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn band_count_covers_nyquist() {
        let plp = PlpAnalyzer::new(512, 16_000.0, 12);
        assert_eq!(plp.n_bands(), 21);
        let c = plp.cepstra(&vec![0.0; 21]);
        assert_eq!(c.len(), 13);
        assert!(c.iter().all(|v| v.is_finite()));
    }
}
