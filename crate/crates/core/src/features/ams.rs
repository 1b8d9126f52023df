//! Subband envelopes and their 1–16 Hz amplitude-modulation spectra.

use std::f64::consts::PI;

use rustfft::{num_complex::Complex, FftPlanner};

use crate::linalg::{gemm, Op};

/// Envelope sample rate after decimation (16 kHz / 16).
pub const ENVELOPE_RATE: f64 = 1000.0;
pub const ENVELOPE_DECIMATION: usize = 16;
/// Envelope samples of context analysed around each frame centre.
pub const MODULATION_CONTEXT: usize = 512;
/// Modulation frequencies 1.0, 1.25, …, 16.0 Hz.
pub const MODULATION_BINS: usize = 61;

pub fn modulation_frequencies() -> Vec<f64> {
    (0..MODULATION_BINS).map(|i| 1.0 + 0.25 * i as f64).collect()
}

/// Analytic-signal split of one subband: a non-negative envelope and a
/// unit-modulus carrier whose product is the analytic signal.
#[derive(Debug, Clone)]
pub struct ModulationDecomposition {
    pub message: Vec<f64>,
    pub carrier: Vec<Complex<f64>>,
}

/// Analytic signal via the one-sided FFT construction.
pub fn analytic_signal(x: &[f64]) -> Vec<Complex<f64>> {
    analytic_signal_with(&mut FftPlanner::new(), x)
}

/// As [`analytic_signal`], reusing the plans cached in `planner`.
pub fn analytic_signal_with(planner: &mut FftPlanner<f64>, x: &[f64]) -> Vec<Complex<f64>> {
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
    planner.plan_fft_forward(n).process(&mut buf);
    for (k, b) in buf.iter_mut().enumerate() {
        let h = if k == 0 || (n % 2 == 0 && k == n / 2) {
            1.0
        } else if k < n.div_ceil(2) {
            2.0
        } else {
            0.0
        };
        *b *= h / n as f64;
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    buf
}

pub fn modulation_decomposition(x: &[f64]) -> ModulationDecomposition {
    modulation_decomposition_with(&mut FftPlanner::new(), x)
}

pub fn modulation_decomposition_with(planner: &mut FftPlanner<f64>, x: &[f64]) -> ModulationDecomposition {
    let analytic = analytic_signal_with(planner, x);
    let message: Vec<f64> = analytic.iter().map(|z| z.norm()).collect();
    let carrier = analytic
        .iter()
        .zip(&message)
        .map(|(z, &m)| if m > 0.0 { z / m } else { Complex::new(1.0, 0.0) })
        .collect();
    ModulationDecomposition { message, carrier }
}

/// Block-mean decimation of the envelope to [`ENVELOPE_RATE`].
pub fn decimated_envelope(x: &[f64]) -> Vec<f64> {
    decimated_envelope_with(&mut FftPlanner::new(), x)
}

pub fn decimated_envelope_with(planner: &mut FftPlanner<f64>, x: &[f64]) -> Vec<f64> {
    modulation_decomposition_with(planner, x)
        .message
        .chunks(ENVELOPE_DECIMATION)
        .map(|c| c.iter().sum::<f64>() / c.len() as f64)
        .collect()
}

/// Precomputed Hann-windowed cosine/sine basis for the modulation DFT.
#[derive(Debug, Clone)]
pub struct ModulationAnalyzer {
    /// `MODULATION_CONTEXT × 2·MODULATION_BINS`, cos columns then sin columns.
    basis: Vec<f64>,
    norm: f64,
}

impl Default for ModulationAnalyzer {
    fn default() -> Self {
        Self::new()
    }
}

impl ModulationAnalyzer {
    pub fn new() -> Self {
        let freqs = modulation_frequencies();
        let cols = 2 * MODULATION_BINS;
        let mut basis = vec![0.0; MODULATION_CONTEXT * cols];
        let mut norm = 0.0;
        for n in 0..MODULATION_CONTEXT {
            let w = 0.5 - 0.5 * (2.0 * PI * n as f64 / MODULATION_CONTEXT as f64).cos();
            norm += w;
            for (i, f) in freqs.iter().enumerate() {
                let phase = 2.0 * PI * f * n as f64 / ENVELOPE_RATE;
                basis[n * cols + i] = w * phase.cos();
                basis[n * cols + MODULATION_BINS + i] = w * phase.sin();
            }
        }
        Self { basis, norm }
    }

    /// Modulation magnitude spectra (one row of [`MODULATION_BINS`] per
    /// centre) of `envelope` around the given envelope-sample centres. Context
    /// beyond the ends repeats the edge value; each context has its mean
    /// removed so DC never leaks into the band.
    pub fn spectra(&self, envelope: &[f64], centers: &[usize]) -> Vec<Vec<f64>> {
        let t = centers.len();
        if t == 0 {
            return Vec::new();
        }
        let half = MODULATION_CONTEXT as isize / 2;
        let last = envelope.len().saturating_sub(1) as isize;
        let mut ctx = vec![0.0; t * MODULATION_CONTEXT];
        for (row, &c) in ctx.chunks_mut(MODULATION_CONTEXT).zip(centers) {
            for (n, v) in row.iter_mut().enumerate() {
                let idx = (c as isize - half + n as isize).clamp(0, last);
                *v = envelope.get(idx as usize).copied().unwrap_or(0.0);
            }
            let mean = row.iter().sum::<f64>() / MODULATION_CONTEXT as f64;
            row.iter_mut().for_each(|v| *v -= mean);
        }
        let cols = 2 * MODULATION_BINS;
        let mut out = vec![0.0; t * cols];
        gemm(t, MODULATION_CONTEXT, cols, 1.0, &ctx, Op::Plain, &self.basis, Op::Plain, 0.0, &mut out);
        out.chunks(cols)
            .map(|r| {
                (0..MODULATION_BINS)
                    .map(|i| r[i].hypot(r[MODULATION_BINS + i]) / self.norm)
                    .collect()
            })
            .collect()
    }
}
