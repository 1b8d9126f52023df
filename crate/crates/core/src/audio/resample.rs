//! Band-limited resampling with a Kaiser-windowed sinc kernel.

use std::f64::consts::PI;

use super::AudioSignal;
use crate::error::{Error, Result};

/// Zero crossings of the sinc on each side of the kernel centre.
const ZERO_CROSSINGS: f64 = 32.0;
const KAISER_BETA: f64 = 8.6;
/// Cutoff as a fraction of the lower Nyquist frequency.
const CUTOFF_FRACTION: f64 = 0.92;

fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let half = x / 2.0;
    for k in 1..200 {
        term *= (half / k as f64) * (half / k as f64);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// Resamples `sig` to `target_rate`. Output samples span the same interval
/// as the input (the last one never lies past the last input sample), so the
/// duration is kept within one output sample.
pub fn resample(sig: &AudioSignal, target_rate: u32) -> Result<AudioSignal> {
    if target_rate == 0 {
        return Err(Error::Domain("target rate must be positive".into()));
    }
    let src_rate = sig.sample_rate();
    if src_rate == target_rate {
        return Ok(sig.clone());
    }
    let x = sig.samples();
    let out_len = match x.len() {
        0 => 0,
        n => ((n as u64 - 1) * target_rate as u64 / src_rate as u64) as usize + 1,
    };

    // cutoff in cycles per input sample
    let cutoff = 0.5 * CUTOFF_FRACTION * (target_rate.min(src_rate) as f64) / src_rate as f64;
    let half_width = ZERO_CROSSINGS / (2.0 * cutoff);
    let norm = bessel_i0(KAISER_BETA);
    let step = src_rate as f64 / target_rate as f64;

    // point reflection about the end samples keeps the kernel whole at the
    // edges without a slope break
    let last = x.len() as isize - 1;
    let at = |k: isize| -> f64 {
        if k < 0 {
            2.0 * x[0] - x[(-k).min(last) as usize]
        } else if k > last {
            2.0 * x[last as usize] - x[(2 * last - k).max(0) as usize]
        } else {
            x[k as usize]
        }
    };

    let mut out = Vec::with_capacity(out_len);
    for n in 0..out_len {
        let t = n as f64 * step;
        let lo = (t - half_width).ceil() as isize;
        let hi = (t + half_width).floor() as isize;
        let mut acc = 0.0;
        for k in lo..=hi {
            let tau = t - k as f64;
            let r = tau / half_width;
            let window = bessel_i0(KAISER_BETA * (1.0 - r * r).max(0.0).sqrt()) / norm;
            acc += at(k) * 2.0 * cutoff * sinc(2.0 * cutoff * tau) * window;
        }
        out.push(acc);
    }
    AudioSignal::new(out, target_rate)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tone(freq: f64, rate: u32, len: usize) -> AudioSignal {
        let x = (0..len)
            .map(|i| (2.0 * PI * freq * i as f64 / rate as f64).sin())
            .collect();
        AudioSignal::new(x, rate).unwrap()
    }

    #[test]
    fn same_rate_is_identity() {
        let sig = tone(440.0, 16_000, 1000);
        assert_eq!(resample(&sig, 16_000).unwrap(), sig);
    }

    #[test]
    fn doubling_rate_doubles_length() {
        let sig = tone(440.0, 8_000, 8000);
        let up = resample(&sig, 16_000).unwrap();
        assert!((up.len() as i64 - 16_000).abs() <= 1);
        assert_eq!(up.sample_rate(), 16_000);
    }

    #[test]
    fn upsampled_tone_matches_analytic_tone() {
        let up = resample(&tone(440.0, 8_000, 8000), 16_000).unwrap();
        let reference = tone(440.0, 16_000, 16_000);
        // ignore kernel edge transients
        let err: f64 = up.samples()[1000..15000]
            .iter()
            .zip(&reference.samples()[1000..15000])
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-3, "max deviation {err}");
    }

    #[test]
    fn zero_target_rate_is_rejected() {
        assert!(resample(&tone(100.0, 8_000, 10), 0).is_err());
    }
}
