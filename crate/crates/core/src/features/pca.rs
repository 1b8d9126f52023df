//! Principal component projection.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Relative eigenvalue below which a direction counts as absent.
const RANK_TOL: f64 = 1e-10;

/// PCA projector onto `k` components. Unfitted until [`Pca::fit`] succeeds.
#[derive(Debug, Clone, PartialEq)]
pub struct Pca {
    k: usize,
    mean: Vec<f64>,
    /// `k × dim` row-major; absent components are zero rows.
    components: Vec<f64>,
    eigenvalues: Vec<f64>,
}

impl Pca {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            mean: Vec::new(),
            components: Vec::new(),
            eigenvalues: Vec::new(),
        }
    }

    /// Restores a fitted projector from stored parts.
    pub fn from_parts(k: usize, mean: Vec<f64>, components: Vec<f64>, eigenvalues: Vec<f64>) -> Result<Self> {
        if components.len() != k * mean.len() || eigenvalues.len() != k {
            return Err(Error::Shape("PCA parts are inconsistent".into()));
        }
        Ok(Self {
            k,
            mean,
            components,
            eigenvalues,
        })
    }

    pub fn is_fitted(&self) -> bool {
        !self.mean.is_empty()
    }

    pub fn n_components(&self) -> usize {
        self.k
    }

    pub fn input_dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn components(&self) -> &[f64] {
        &self.components
    }

    /// Variances along the kept components, largest first (zero when absent).
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Fits on rows of equal length. When the data span fewer than `k`
    /// directions the missing components are zero and a warning is logged.
    pub fn fit(&mut self, rows: &[Vec<f64>]) -> Result<()> {
        let n = rows.len();
        let dim = rows.first().map_or(0, Vec::len);
        if n == 0 || dim == 0 {
            return Err(Error::DegenerateInput("PCA needs at least one non-empty sample".into()));
        }
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::Shape("PCA samples differ in length".into()));
        }
        let mut mean = vec![0.0; dim];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let centered = DMatrix::from_fn(n, dim, |i, j| rows[i][j] - mean[j]);
        let cov = centered.transpose() * &centered / n as f64;
        let eig = SymmetricEigen::new(cov);
        let mut order: Vec<usize> = (0..dim).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let top = eig.eigenvalues[order[0]].max(0.0);

        let mut components = vec![0.0; self.k * dim];
        let mut eigenvalues = vec![0.0; self.k];
        let mut kept = 0;
        for (slot, &idx) in order.iter().take(self.k).enumerate() {
            let lambda = eig.eigenvalues[idx];
            if top <= 0.0 || lambda <= RANK_TOL * top {
                break;
            }
            let v = eig.eigenvectors.column(idx);
            // sign convention: largest-magnitude entry positive
            let pivot = v.iter().copied().max_by(|a, b| a.abs().total_cmp(&b.abs())).unwrap_or(1.0);
            let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
            for j in 0..dim {
                components[slot * dim + j] = sign * v[j];
            }
            eigenvalues[slot] = lambda;
            kept += 1;
        }
        if kept < self.k {
            log::warn!("PCA: data span only {kept} of the {} requested directions; zero-padding", self.k);
        }
        self.mean = mean;
        self.components = components;
        self.eigenvalues = eigenvalues;
        Ok(())
    }

    pub fn project(&self, v: &[f64]) -> Result<Vec<f64>> {
        if !self.is_fitted() {
            return Err(Error::State("PCA projection used before fitting".into()));
        }
        if v.len() != self.mean.len() {
            return Err(Error::Shape(format!("PCA expects {} dims, got {}", self.mean.len(), v.len())));
        }
        let dim = self.mean.len();
        Ok(self
            .components
            .chunks(dim)
            .map(|c| c.iter().zip(v).zip(&self.mean).map(|((c, x), m)| c * (x - m)).sum())
            .collect())
    }

    /// Maps projected coordinates back to the input space.
    pub fn reconstruct(&self, z: &[f64]) -> Result<Vec<f64>> {
        if !self.is_fitted() {
            return Err(Error::State("PCA reconstruction used before fitting".into()));
        }
        let dim = self.mean.len();
        let mut out = self.mean.clone();
        for (c, zk) in self.components.chunks(dim).zip(z) {
            for (o, cj) in out.iter_mut().zip(c) {
                *o += zk * cj;
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn unfitted_projection_is_a_state_error() {
        assert!(matches!(Pca::new(3).project(&[1.0, 2.0]), Err(Error::State(_))));
    }

    #[test]
    fn axis_aligned_data_recovers_axes() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let scales = [1.0, 5.0, 0.2];
        let rows: Vec<Vec<f64>> = (0..500)
            .map(|_| scales.iter().map(|s| s * rng.random_range(-1.0..1.0)).collect())
            .collect();
        let mut pca = Pca::new(3);
        pca.fit(&rows).unwrap();
        let c = pca.components();
        for (slot, axis) in [1usize, 0, 2].iter().enumerate() {
            assert!((c[slot * 3 + axis].abs() - 1.0).abs() < 1e-2, "{c:?}");
        }
    }

    #[test]
    fn mean_projects_to_zero() {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64, (i * i) as f64, 3.0]).collect();
        let mut pca = Pca::new(2);
        pca.fit(&rows).unwrap();
        let z = pca.project(&pca.mean().to_vec()).unwrap();
        assert!(z.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn rank_deficient_data_is_zero_padded() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, 2.0 * i as f64, 0.0]).collect();
        let mut pca = Pca::new(3);
        pca.fit(&rows).unwrap();
        let z = pca.project(&[1.0, 1.0, 1.0]).unwrap();
        assert_eq!(z.len(), 3);
        assert_eq!(&z[1..], &[0.0, 0.0]);
        assert_eq!(&pca.eigenvalues()[1..], &[0.0, 0.0]);
    }
}
