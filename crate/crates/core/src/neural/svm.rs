//! Linear soft-margin SVM trained by dual coordinate descent.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvmConfig {
    /// Weight of the mean hinge loss against ½‖w‖².
    pub c: f64,
    /// Maximum passes over the data.
    pub iterations: usize,
    /// Stop when the projected-gradient spread falls below this.
    pub tolerance: f64,
    /// Weight each class's hinge terms by `n / (2 · n_class)`.
    pub balanced: bool,
}

impl Default for SvmConfig {
    fn default() -> Self {
        Self {
            c: 1.0,
            iterations: 1000,
            tolerance: 1e-4,
            balanced: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSvm {
    pub w: Vec<f64>,
    pub b: f64,
    pub c: f64,
}

impl LinearSvm {
    pub fn decision(&self, x: &[f64]) -> f64 {
        dot(&self.w, x) + self.b
    }

    pub fn predict(&self, x: &[f64]) -> bool {
        self.decision(x) >= 0.0
    }

    /// `½‖w‖² + C · mean hinge` on a labelled set.
    pub fn objective(&self, rows: &[Vec<f64>], labels: &[bool]) -> f64 {
        objective(&self.w, self.b, self.c, rows, labels)
    }
}

fn sign(label: bool) -> f64 {
    if label {
        1.0
    } else {
        -1.0
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(a, b)| a * b).sum()
}

pub fn objective(w: &[f64], b: f64, c: f64, rows: &[Vec<f64>], labels: &[bool]) -> f64 {
    let hinge: f64 = rows
        .iter()
        .zip(labels)
        .map(|(x, &l)| (1.0 - sign(l) * (dot(w, x) + b)).max(0.0))
        .sum();
    0.5 * dot(w, w) + c * hinge / rows.len().max(1) as f64
}

/// Scale of the constant feature that carries the bias during the dual
/// solve; large values make its implicit regularization negligible.
const BIAS_FEATURE: f64 = 10.0;

/// Minimizes `½‖w‖² + C · mean hinge` (bias unregularized).
///
/// Dual coordinate descent over box constraints `0 ≤ α_i ≤ C/n` with the
/// bias folded in as a constant feature, then the bias is re-optimized
/// exactly for the final `w`.
pub fn svm_train(rows: &[Vec<f64>], labels: &[bool], cfg: &SvmConfig) -> Result<LinearSvm> {
    if rows.len() != labels.len() || rows.is_empty() {
        return Err(Error::Shape("SVM needs one label per sample".into()));
    }
    if !(cfg.c > 0.0) {
        return Err(Error::Config(format!("SVM C must be positive, got {}", cfg.c)));
    }
    let positives = labels.iter().filter(|&&l| l).count();
    if positives == 0 || positives == labels.len() {
        return Err(Error::DegenerateModel("SVM training data has a single class".into()));
    }
    let dim = rows[0].len();
    if rows.iter().any(|r| r.len() != dim) {
        return Err(Error::Shape("SVM samples differ in length".into()));
    }
    let n = rows.len();
    let class_weight = |l: bool| {
        if !cfg.balanced {
            1.0
        } else if l {
            n as f64 / (2.0 * positives as f64)
        } else {
            n as f64 / (2.0 * (n - positives) as f64)
        }
    };
    let upper: Vec<f64> = labels.iter().map(|&l| cfg.c * class_weight(l) / n as f64).collect();
    let q: Vec<f64> = rows.iter().map(|x| dot(x, x) + BIAS_FEATURE * BIAS_FEATURE).collect();
    let mut alpha = vec![0.0; n];
    let mut w = vec![0.0; dim];
    let mut wb = 0.0;
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5EED);
    for _ in 0..cfg.iterations.max(1) {
        order.shuffle(&mut rng);
        let (mut pg_max, mut pg_min) = (f64::NEG_INFINITY, f64::INFINITY);
        for &i in &order {
            let y = sign(labels[i]);
            let x = &rows[i];
            let g = y * (dot(&w, x) + wb * BIAS_FEATURE) - 1.0;
            let pg = if alpha[i] <= 0.0 {
                g.min(0.0)
            } else if alpha[i] >= upper[i] {
                g.max(0.0)
            } else {
                g
            };
            pg_max = pg_max.max(pg);
            pg_min = pg_min.min(pg);
            if pg != 0.0 {
                let old = alpha[i];
                alpha[i] = (old - g / q[i]).clamp(0.0, upper[i]);
                let d = (alpha[i] - old) * y;
                w.iter_mut().zip(x).for_each(|(w, x)| *w += d * x);
                wb += d * BIAS_FEATURE;
            }
        }
        if pg_max - pg_min < cfg.tolerance {
            break;
        }
    }
    let scores: Vec<f64> = rows.iter().map(|x| dot(&w, x)).collect();
    let weights: Vec<f64> = labels.iter().map(|&l| class_weight(l)).collect();
    let b = best_bias(&scores, labels, &weights);
    Ok(LinearSvm { w, b, c: cfg.c })
}

/// Bias minimizing the weighted hinge loss for fixed scores `f_i`.
///
/// The loss is convex piecewise linear in `b`. A positive sample contributes
/// slope `−w` while `b < 1 − f`, a negative one `+w` once `b > −1 − f`; the
/// minimum sits at the first breakpoint where the right slope turns
/// non-negative.
fn best_bias(scores: &[f64], labels: &[bool], weights: &[f64]) -> f64 {
    let mut points: Vec<(f64, f64)> = scores
        .iter()
        .zip(labels)
        .zip(weights)
        .map(|((&f, &l), &w)| if l { (1.0 - f, w) } else { (-1.0 - f, w) })
        .collect();
    points.sort_by(|a, b| a.0.total_cmp(&b.0));
    // right slope at −∞: every positive is active
    let mut slope: f64 = -labels.iter().zip(weights).filter(|(l, _)| **l).map(|(_, w)| w).sum::<f64>();
    // passing a breakpoint deactivates a positive or activates a negative;
    // both raise the slope by that sample's weight
    for &(b, w) in &points {
        slope += w;
        if slope >= -1e-12 {
            return b;
        }
    }
    points.last().map_or(0.0, |p| p.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separates_two_points_on_a_line() {
        let svm = svm_train(&[vec![-1.0], vec![1.0]], &[false, true], &SvmConfig::default()).unwrap();
        assert!(!svm.predict(&[-1.0]) && svm.predict(&[1.0]));
    }

    #[test]
    fn single_class_is_degenerate() {
        let err = svm_train(&[vec![0.0], vec![1.0]], &[true, true], &SvmConfig::default());
        assert!(matches!(err, Err(Error::DegenerateModel(_))));
    }

    #[test]
    fn objective_close_to_grid_search() {
        let rows = vec![vec![0.0, 0.0], vec![1.0, 0.2], vec![0.3, 1.0], vec![1.4, 1.1]];
        let labels = [false, false, true, true];
        let cfg = SvmConfig { c: 1.0, ..SvmConfig::default() };
        let svm = svm_train(&rows, &labels, &cfg).unwrap();
        let mut best = f64::INFINITY;
        let steps = 120;
        for i in 0..=steps {
            for j in 0..=steps {
                for k in 0..=steps {
                    let w = [-3.0 + 6.0 * i as f64 / steps as f64, -3.0 + 6.0 * j as f64 / steps as f64];
                    let b = -3.0 + 6.0 * k as f64 / steps as f64;
                    best = best.min(objective(&w, b, 1.0, &rows, &labels));
                }
            }
        }
        let got = svm.objective(&rows, &labels);
        assert!(got <= best * 1.001 + 1e-9, "{got} vs grid {best}");
    }

    #[test]
    fn duplicating_data_keeps_predictions() {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![(i as f64 * 0.7).sin(), (i as f64 * 1.9).cos()]).collect();
        let labels: Vec<bool> = rows.iter().map(|r| r[0] + 0.3 * r[1] > 0.1).collect();
        let cfg = SvmConfig::default();
        let a = svm_train(&rows, &labels, &cfg).unwrap();
        let rows2 = [rows.clone(), rows.clone()].concat();
        let labels2 = [labels.clone(), labels.clone()].concat();
        let b = svm_train(&rows2, &labels2, &cfg).unwrap();
        for r in &rows {
            assert_eq!(a.predict(r), b.predict(r));
        }
    }
}
