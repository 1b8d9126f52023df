//! Normalized-autocorrelation pitch estimate.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PitchConfig {
    pub min_hz: f64,
    pub max_hz: f64,
    /// Peaks of the normalized autocorrelation below this are unvoiced.
    pub voicing_threshold: f64,
    /// Analysis frame in samples (40 ms at 16 kHz).
    pub frame_len: usize,
}

impl Default for PitchConfig {
    fn default() -> Self {
        Self {
            min_hz: 60.0,
            max_hz: 400.0,
            voicing_threshold: 0.3,
            frame_len: 640,
        }
    }
}

fn normalized_autocorr(x: &[f64], lag: usize) -> f64 {
    let (a, b) = (&x[..x.len() - lag], &x[lag..]);
    let num: f64 = a.iter().zip(b).map(|(p, q)| p * q).sum();
    let ea: f64 = a.iter().map(|v| v * v).sum();
    let eb: f64 = b.iter().map(|v| v * v).sum();
    let den = (ea * eb).sqrt();
    if den <= 1e-20 {
        0.0
    } else {
        num / den
    }
}

/// F0 in Hz, or 0 when the frame is unvoiced or silent.
///
/// Picks the shortest lag whose local autocorrelation peak reaches 90% of the
/// global maximum (guards against octave-down errors) and refines it by
/// parabolic interpolation.
pub fn pitch(frame: &[f64], sample_rate: f64, cfg: &PitchConfig) -> f64 {
    let min_lag = (sample_rate / cfg.max_hz).floor().max(1.0) as usize;
    let max_lag = ((sample_rate / cfg.min_hz).ceil() as usize).min(frame.len().saturating_sub(2));
    if max_lag <= min_lag + 1 {
        return 0.0;
    }
    let energy: f64 = frame.iter().map(|v| v * v).sum();
    if energy <= 1e-12 * frame.len() as f64 {
        return 0.0;
    }
    let r: Vec<f64> = (min_lag - 1..=max_lag + 1).map(|l| normalized_autocorr(frame, l)).collect();
    let at = |lag: usize| r[lag + 1 - min_lag];
    let best = (min_lag..=max_lag).map(at).fold(f64::NEG_INFINITY, f64::max);
    if best < cfg.voicing_threshold {
        return 0.0;
    }
    let Some(lag) = (min_lag..=max_lag).find(|&l| at(l) >= 0.9 * best && at(l) >= at(l - 1) && at(l) >= at(l + 1))
    else {
        return 0.0;
    };
    let (y0, y1, y2) = (at(lag - 1), at(lag), at(lag + 1));
    let denom = y0 - 2.0 * y1 + y2;
    let shift = if denom.abs() > 1e-12 { (0.5 * (y0 - y2) / denom).clamp(-0.5, 0.5) } else { 0.0 };
    (sample_rate / (lag as f64 + shift)).clamp(cfg.min_hz, cfg.max_hz)
}
