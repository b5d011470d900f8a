use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{self, C64};

/// Eigenvalues (ascending) and the matching orthonormal eigenvectors.
#[derive(Clone, Debug)]
pub struct SpectralDecomposition {
    eigenvalues: Array1<f64>,
    eigenvectors: Array2<C64>,
}

/// Seeded probe check used after every dense decomposition.
const PROBE_TOLERANCE: f64 = 1e-10;

impl SpectralDecomposition {
    /// Dense hermitian eigendecomposition, probed for accuracy.
    pub fn compute(matrix: &ArrayView2<C64>) -> Result<Self> {
        let (eigenvalues, eigenvectors) = linalg::eigh(matrix)?;
        let decomposition = Self {
            eigenvalues,
            eigenvectors,
        };
        let residual = decomposition.probe_residual(matrix, 2);
        if residual > PROBE_TOLERANCE {
            return Err(Error::InternalConsistency(format!(
                "eigendecomposition probe residual {residual:e} exceeds {PROBE_TOLERANCE:e}"
            )));
        }
        Ok(decomposition)
    }

    /// Wrap eigenpairs that are already sorted ascending.
    pub fn from_sorted(eigenvalues: Array1<f64>, eigenvectors: Array2<C64>) -> Self {
        debug_assert!(eigenvalues.windows(2).into_iter().all(|w| w[0] <= w[1]));
        Self {
            eigenvalues,
            eigenvectors,
        }
    }

    /// Sort arbitrary eigenpairs ascending.
    pub fn from_unsorted(eigenvalues: Vec<f64>, eigenvectors: Array2<C64>) -> Self {
        let mut order: Vec<usize> = (0..eigenvalues.len()).collect();
        order.sort_by(|&a, &b| eigenvalues[a].total_cmp(&eigenvalues[b]));
        let values: Array1<f64> = order.iter().map(|&i| eigenvalues[i]).collect();
        let vectors = eigenvectors.select(Axis(1), &order);
        Self {
            eigenvalues: values,
            eigenvectors: vectors,
        }
    }

    pub fn eigenvalues(&self) -> &Array1<f64> {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &Array2<C64> {
        &self.eigenvectors
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn spectral_radius(&self) -> f64 {
        self.eigenvalues.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn min_abs(&self) -> f64 {
        self.eigenvalues
            .iter()
            .fold(f64::INFINITY, |m, v| m.min(v.abs()))
    }

    /// Indices of eigenvalues satisfying `keep`, in ascending order.
    pub fn select(&self, keep: impl Fn(f64) -> bool) -> Vec<usize> {
        (0..self.dim())
            .filter(|&i| keep(self.eigenvalues[i]))
            .collect()
    }

    /// `U diag(f(λ)) U*` without any domain checks.
    pub fn apply(&self, values: &[f64]) -> Array2<C64> {
        linalg::reassemble(&self.eigenvectors.view(), values)
    }

    /// `‖U diag(λ) U* − T‖_op / ‖T‖_op` (dense, O(n³)).
    pub fn reconstruction_residual(&self, matrix: &ArrayView2<C64>) -> Result<f64> {
        let rebuilt = self.apply(&self.eigenvalues.to_vec());
        let scale = linalg::spectral_norm(matrix)?.max(f64::MIN_POSITIVE);
        Ok(linalg::spectral_norm(&(rebuilt - matrix).view())? / scale)
    }

    /// `‖U*U − I‖_op`.
    pub fn orthonormality_residual(&self) -> Result<f64> {
        let u = &self.eigenvectors;
        let gram = linalg::adjoint(&u.view()).dot(u) - linalg::identity(u.ncols());
        linalg::spectral_norm(&gram.view())
    }

    /// Relative residual `max ‖(UΛU* − T)x‖ / (‖T‖‖x‖)` over seeded random `x`.
    fn probe_residual(&self, matrix: &ArrayView2<C64>, probes: usize) -> f64 {
        let n = self.dim();
        if n == 0 {
            return 0.0;
        }
        let scale = self.spectral_radius().max(f64::MIN_POSITIVE);
        let mut rng = ChaCha8Rng::seed_from_u64(0x0b5e_55ed);
        let x = linalg::random_complex_matrix(&mut rng, n, probes);
        let u = &self.eigenvectors;
        let mut coeff = linalg::adjoint(&u.view()).dot(&x);
        for (mut row, &lam) in coeff.axis_iter_mut(Axis(0)).zip(self.eigenvalues.iter()) {
            row.mapv_inplace(|z| z * lam);
        }
        let diff = u.dot(&coeff) - matrix.dot(&x);
        let xn = linalg::frobenius(&x.view());
        linalg::frobenius(&diff.view()) / (scale * xn)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_decomposition_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = linalg::random_hermitian(&mut rng, 30);
        let d = SpectralDecomposition::compute(&a.view()).unwrap();
        assert!(d.reconstruction_residual(&a.view()).unwrap() < 1e-12);
        assert!(d.orthonormality_residual().unwrap() < 1e-12);
        assert!(d.eigenvalues().windows(2).into_iter().all(|w| w[0] <= w[1]));
    }

    #[test]
    fn unsorted_pairs_are_reordered() {
        let v = linalg::identity(3);
        let d = SpectralDecomposition::from_unsorted(vec![2.0, -1.0, 0.5], v);
        assert_eq!(d.eigenvalues().to_vec(), vec![-1.0, 0.5, 2.0]);
        assert_eq!(d.eigenvectors()[[1, 0]], linalg::ONE);
    }
}
