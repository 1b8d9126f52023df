//! Orthonormal two-channel filterbank step with periodic extension.

/// Daubechies db4 scaling filter (8 taps, four vanishing moments).
pub const DB4_LOWPASS: [f64; 8] = [
    0.230_377_813_308_855_23,
    0.714_846_570_552_541_5,
    0.630_880_767_929_590_4,
    -0.027_983_769_416_983_85,
    -0.187_034_811_718_881_14,
    0.030_841_381_835_986_965,
    0.032_883_011_666_982_945,
    -0.010_597_401_784_997_278,
];

/// Quadrature-mirror highpass: `g[n] = (-1)^n h[L-1-n]`.
pub fn qmf_highpass(lowpass: &[f64]) -> Vec<f64> {
    let len = lowpass.len();
    (0..len)
        .map(|n| {
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            sign * lowpass[len - 1 - n]
        })
        .collect()
}

/// Analysis and synthesis taps of one orthonormal wavelet.
#[derive(Debug, Clone, PartialEq)]
pub struct Wavelet {
    pub lowpass: Vec<f64>,
    pub highpass: Vec<f64>,
}

impl Wavelet {
    pub fn db4() -> Self {
        Self {
            lowpass: DB4_LOWPASS.to_vec(),
            highpass: qmf_highpass(&DB4_LOWPASS),
        }
    }

    /// One periodic analysis step. `x.len()` must be even.
    pub fn split(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        (self.filter_down(x, &self.lowpass), self.filter_down(x, &self.highpass))
    }

    /// Only the low or the high half of [`Wavelet::split`].
    pub fn split_one(&self, x: &[f64], high: bool) -> Vec<f64> {
        self.filter_down(x, if high { &self.highpass } else { &self.lowpass })
    }

    fn filter_down(&self, x: &[f64], taps: &[f64]) -> Vec<f64> {
        let n = x.len();
        debug_assert!(n % 2 == 0);
        (0..n / 2)
            .map(|k| {
                taps.iter()
                    .enumerate()
                    .map(|(i, t)| t * x[(2 * k + i) % n])
                    .sum()
            })
            .collect()
    }

    /// Inverse of [`Wavelet::split`]; either branch may be absent (treated as zero).
    pub fn merge(&self, low: Option<&[f64]>, high: Option<&[f64]>) -> Vec<f64> {
        let half = low.or(high).map_or(0, <[f64]>::len);
        let n = 2 * half;
        let mut out = vec![0.0; n];
        for (branch, taps) in [(low, &self.lowpass), (high, &self.highpass)] {
            if let Some(coeffs) = branch {
                for (k, &c) in coeffs.iter().enumerate() {
                    for (i, t) in taps.iter().enumerate() {
                        out[(2 * k + i) % n] += c * t;
                    }
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn db4_is_orthonormal() {
        let h = &DB4_LOWPASS;
        let energy: f64 = h.iter().map(|v| v * v).sum();
        assert!((energy - 1.0).abs() < 1e-12);
        assert!((h.iter().sum::<f64>() - 2f64.sqrt()).abs() < 1e-12);
        // double-shift orthogonality
        for shift in [2, 4, 6] {
            let dot: f64 = (0..8 - shift).map(|n| h[n] * h[n + shift]).sum();
            assert!(dot.abs() < 1e-12, "shift {shift}: {dot}");
        }
        let g = qmf_highpass(h);
        assert!(g.iter().sum::<f64>().abs() < 1e-12);
        let cross: f64 = h.iter().zip(&g).map(|(a, b)| a * b).sum();
        assert!(cross.abs() < 1e-12);
    }

    #[test]
    fn split_merge_reconstructs() {
        let w = Wavelet::db4();
        for n in [2usize, 4, 8, 30, 64] {
            let x: Vec<f64> = (0..n).map(|i| ((i * 37 % 11) as f64 - 5.0) / 3.0).collect();
            let (lo, hi) = w.split(&x);
            let y = w.merge(Some(&lo), Some(&hi));
            for (a, b) in x.iter().zip(&y) {
                assert!((a - b).abs() < 1e-10, "n={n}");
            }
            let e_in: f64 = x.iter().map(|v| v * v).sum();
            let e_out: f64 = lo.iter().chain(&hi).map(|v| v * v).sum();
            assert!((e_in - e_out).abs() < 1e-10 * e_in.max(1.0));
        }
    }
}
