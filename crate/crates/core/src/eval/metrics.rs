use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One-sided critical value of Student's t at the 5% level for large samples.
pub const T_CRITICAL: f64 = 1.645;

/// Identification rate in percent.
pub fn sid_rate(correct: usize, total: usize) -> Result<f64> {
    if total == 0 {
        return Err(Error::UndefinedMetric("identification rate over zero trials".into()));
    }
    if correct > total {
        return Err(Error::Domain(format!("{correct} correct out of {total} trials")));
    }
    Ok(100.0 * correct as f64 / total as f64)
}

fn mean_sd(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// `(mean1 − mean2) / sqrt((SD1² + SD2²) / 2)` with sample (n−1) standard
/// deviations. Both sequences must have the same length, at least 2.
pub fn student_t(x1: &[f64], x2: &[f64]) -> Result<f64> {
    if x1.len() != x2.len() {
        return Err(Error::Shape(format!(
            "t-test needs sequences of equal length, got {} and {}",
            x1.len(),
            x2.len()
        )));
    }
    if x1.len() < 2 {
        return Err(Error::DegenerateInput("t-test needs at least two values per sequence".into()));
    }
    if x1.iter().chain(x2).any(|v| !v.is_finite()) {
        return Err(Error::Domain("t-test values must be finite".into()));
    }
    let (m1, s1) = mean_sd(x1);
    let (m2, s2) = mean_sd(x2);
    let pooled = ((s1 * s1 + s2 * s2) / 2.0).sqrt();
    if pooled == 0.0 {
        return Err(Error::UndefinedMetric("both sequences have zero variance".into()));
    }
    Ok((m1 - m2) / pooled)
}

/// Harmonic mean of precision and recall; 0 when both are 0.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Speaker confusion counts: rows are true speakers, columns predictions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<usize>>,
}

impl ConfusionMatrix {
    pub fn new(k: usize) -> Self {
        Self {
            counts: vec![vec![0; k]; k],
        }
    }

    pub fn from_pairs(k: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut cm = Self::new(k);
        for (truth, pred) in pairs {
            cm.add(truth, pred)?;
        }
        Ok(cm)
    }

    pub fn classes(&self) -> usize {
        self.counts.len()
    }

    pub fn add(&mut self, truth: usize, predicted: usize) -> Result<()> {
        let k = self.classes();
        if truth >= k || predicted >= k {
            return Err(Error::Shape(format!("label ({truth}, {predicted}) outside {k} classes")));
        }
        self.counts[truth][predicted] += 1;
        Ok(())
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> usize {
        (0..self.classes()).map(|i| self.counts[i][i]).sum()
    }

    pub fn row_sums(&self) -> Vec<usize> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn sid_rate(&self) -> Result<f64> {
        sid_rate(self.trace(), self.total())
    }

    /// One-vs-rest `(tp, fp, fn)` for class `c`.
    pub fn one_vs_rest(&self, c: usize) -> (usize, usize, usize) {
        let tp = self.counts[c][c];
        let col: usize = self.counts.iter().map(|r| r[c]).sum();
        let row: usize = self.counts[c].iter().sum();
        (tp, col - tp, row - tp)
    }
}

/// Precision, recall and F1 of one class or a macro average.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Per-class scores for classes with at least one true instance, in class
/// order. A class never predicted has precision 0.
pub fn per_class_prf(cm: &ConfusionMatrix) -> Vec<(usize, Prf)> {
    (0..cm.classes())
        .filter_map(|c| {
            let (tp, fp, fn_) = cm.one_vs_rest(c);
            if tp + fn_ == 0 {
                return None;
            }
            let precision = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
            let recall = tp as f64 / (tp + fn_) as f64;
            Some((
                c,
                Prf {
                    precision,
                    recall,
                    f1: f1_score(precision, recall),
                },
            ))
        })
        .collect()
}

/// Macro-averaged precision and recall over classes with true instances;
/// F1 is the harmonic mean of the two averages. Empty classes are skipped
/// with a warning.
pub fn precision_recall_f1(cm: &ConfusionMatrix) -> Result<Prf> {
    let scores = per_class_prf(cm);
    if scores.is_empty() {
        return Err(Error::UndefinedMetric("confusion matrix has no trials".into()));
    }
    if scores.len() < cm.classes() {
        let empty: Vec<usize> = (0..cm.classes()).filter(|c| !scores.iter().any(|s| s.0 == *c)).collect();
        warn!("classes {empty:?} have no true instances and are left out of the macro average");
    }
    let n = scores.len() as f64;
    let precision = scores.iter().map(|s| s.1.precision).sum::<f64>() / n;
    let recall = scores.iter().map(|s| s.1.recall).sum::<f64>() / n;
    Ok(Prf {
        precision,
        recall,
        f1: f1_score(precision, recall),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rates() {
        assert_eq!(sid_rate(43, 50).unwrap(), 86.0);
        assert_eq!(sid_rate(0, 7).unwrap(), 0.0);
        assert!(matches!(sid_rate(0, 0), Err(Error::UndefinedMetric(_))));
        assert!(sid_rate(3, 2).is_err());
    }

    #[test]
    fn hand_evaluated_t() {
        // SDs 2 and 1, pooled sqrt(2.5); mean difference 2
        let t = student_t(&[2.0, 4.0, 6.0], &[1.0, 2.0, 3.0]).unwrap();
        assert!((t - 2.0 / 2.5f64.sqrt()).abs() < 1e-12);
        assert!((t - 1.2649).abs() < 1e-4);
        assert!(matches!(student_t(&[1.0, 1.0], &[2.0, 2.0]), Err(Error::UndefinedMetric(_))));
        assert!(matches!(student_t(&[1.0, 2.0], &[2.0]), Err(Error::Shape(_))));
        assert!(student_t(&[1.0], &[2.0]).is_err());
    }

    #[test]
    fn precision_from_counts() {
        // class 0: 8 hits, 2 false alarms from class 1
        let cm = ConfusionMatrix {
            counts: vec![vec![8, 0], vec![2, 5]],
        };
        let per = per_class_prf(&cm);
        assert_eq!(per[0].1.precision, 0.8);
        assert_eq!(per[0].1.recall, 1.0);
    }

    #[test]
    fn perfect_diagonal() {
        let cm = ConfusionMatrix::from_pairs(3, [(0, 0), (1, 1), (2, 2), (2, 2)]).unwrap();
        let m = precision_recall_f1(&cm).unwrap();
        assert_eq!((m.precision, m.recall, m.f1), (1.0, 1.0, 1.0));
        assert_eq!(cm.sid_rate().unwrap(), 100.0);
    }

    #[test]
    fn empty_class_is_excluded() {
        let cm = ConfusionMatrix::from_pairs(3, [(0, 0), (1, 1), (1, 0)]).unwrap();
        let per = per_class_prf(&cm);
        assert_eq!(per.len(), 2);
        let m = precision_recall_f1(&cm).unwrap();
        assert!((m.recall - 0.75).abs() < 1e-12);
        assert!(precision_recall_f1(&ConfusionMatrix::new(2)).is_err());
    }
}
