//! Thin dense helpers over `ndarray` / LAPACK.

use ndarray::{Array1, Array2, ArrayView2, Axis, ShapeBuilder};
use ndarray_linalg::{EigValsh, Eigh, JobSvd, SVDDC, UPLO};
use num_complex::Complex64;
use rand::Rng;

use crate::error::Result;

pub type C64 = Complex64;

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };

pub fn identity(n: usize) -> Array2<C64> {
    Array2::from_diag_elem(n, ONE)
}

pub fn real_diag(values: &[f64]) -> Array2<C64> {
    let n = values.len();
    let mut out = Array2::zeros((n, n));
    for (i, &v) in values.iter().enumerate() {
        out[[i, i]] = C64::new(v, 0.0);
    }
    out
}

pub fn adjoint(a: &ArrayView2<C64>) -> Array2<C64> {
    a.t().mapv(|z| z.conj())
}

pub fn frobenius(a: &ArrayView2<C64>) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `(A + A*)/2` with an exactly real diagonal.
pub fn hermitian_part(a: &ArrayView2<C64>) -> Array2<C64> {
    let n = a.nrows();
    let mut out = Array2::zeros((n, n));
    for i in 0..n {
        out[[i, i]] = C64::new(a[[i, i]].re, 0.0);
        for j in 0..i {
            let v = (a[[i, j]] + a[[j, i]].conj()) * 0.5;
            out[[i, j]] = v;
            out[[j, i]] = v.conj();
        }
    }
    out
}

/// Fortran-ordered copy; the LAPACK wrappers conjugate row-major
/// hermitian input.
fn column_major(a: &ArrayView2<C64>) -> Array2<C64> {
    let mut out = Array2::zeros(a.dim().f());
    out.assign(a);
    out
}

/// Eigenvalues ascending with the matching orthonormal eigenvectors as columns.
pub fn eigh(a: &ArrayView2<C64>) -> Result<(Array1<f64>, Array2<C64>)> {
    if a.nrows() == 0 {
        return Ok((Array1::zeros(0), Array2::zeros((0, 0))));
    }
    let (w, v) = column_major(a).eigh(UPLO::Lower)?;
    Ok((w, v))
}

pub fn eigvalsh(a: &ArrayView2<C64>) -> Result<Array1<f64>> {
    if a.nrows() == 0 {
        return Ok(Array1::zeros(0));
    }
    Ok(column_major(a).eigvalsh(UPLO::Lower)?)
}

/// Singular values in descending order; empty for degenerate shapes.
pub fn singular_values(a: &ArrayView2<C64>) -> Result<Vec<f64>> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Ok(Vec::new());
    }
    let (_, s, _) = column_major(a).svddc(JobSvd::None)?;
    Ok(s.to_vec())
}

pub fn spectral_norm(a: &ArrayView2<C64>) -> Result<f64> {
    Ok(singular_values(a)?.first().copied().unwrap_or(0.0))
}

/// `U diag(values) U*`.
pub fn reassemble(vectors: &ArrayView2<C64>, values: &[f64]) -> Array2<C64> {
    let mut scaled = vectors.to_owned();
    for (mut col, &v) in scaled.axis_iter_mut(Axis(1)).zip(values) {
        col.mapv_inplace(|z| z * v);
    }
    scaled.dot(&adjoint(vectors))
}

pub fn random_complex_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> Array2<C64> {
    Array2::from_shape_fn((rows, cols), |_| {
        C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    })
}

pub fn random_hermitian<R: Rng>(rng: &mut R, n: usize) -> Array2<C64> {
    let a = random_complex_matrix(rng, n, n);
    hermitian_part(&a.view())
}

/// Haar-ish unitary from the eigenvectors of a random hermitian matrix.
pub fn random_unitary<R: Rng>(rng: &mut R, n: usize) -> Result<Array2<C64>> {
    let h = random_hermitian(rng, n);
    Ok(eigh(&h.view())?.1)
}

/// Orthonormal basis of the eigenvectors of a hermitian (near-)projection
/// whose eigenvalue exceeds `threshold`.
pub fn range_basis(projection: &ArrayView2<C64>, threshold: f64) -> Result<Array2<C64>> {
    let (w, v) = eigh(projection)?;
    let keep: Vec<usize> = (0..w.len()).filter(|&i| w[i] > threshold).collect();
    Ok(v.select(Axis(1), &keep))
}

/// Fraction of nonzero entries below which [`dot_left_sparse`] switches to a
/// row-compressed product.
const SPARSE_DENSITY: f64 = 0.1;

/// `A·B`, exploiting sparsity of `A` when it is mostly zeros (position and
/// ladder operators are).
pub fn dot_left_sparse(a: &ArrayView2<C64>, b: &ArrayView2<C64>) -> Array2<C64> {
    let nnz = a.iter().filter(|z| **z != ZERO).count();
    let total = (a.nrows() * a.ncols()).max(1);
    if nnz as f64 > SPARSE_DENSITY * total as f64 {
        return a.dot(b);
    }
    let mut out = Array2::zeros((a.nrows(), b.ncols()));
    for (i, row) in a.outer_iter().enumerate() {
        let mut target = out.row_mut(i);
        for (k, &v) in row.iter().enumerate() {
            if v != ZERO {
                target.scaled_add(v, &b.row(k));
            }
        }
    }
    out
}

/// `A·B` with sparsity of `B` exploited through `(B*·A*)*`.
pub fn dot_right_sparse(a: &ArrayView2<C64>, b: &ArrayView2<C64>) -> Array2<C64> {
    let bt = adjoint(b);
    let at = adjoint(a);
    adjoint(&dot_left_sparse(&bt.view(), &at.view()).view())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sparse_products_match_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut a = Array2::zeros((30, 30));
        for i in 0..29 {
            a[[i, i + 1]] = C64::new(i as f64, 0.5);
        }
        let b = random_complex_matrix(&mut rng, 30, 7);
        let dense = a.dot(&b);
        let sparse = dot_left_sparse(&a.view(), &b.view());
        assert!(frobenius(&(dense - sparse).view()) < 1e-12);
        let c = random_complex_matrix(&mut rng, 7, 30);
        let right = dot_right_sparse(&c.view(), &a.view());
        assert!(frobenius(&(c.dot(&a) - right).view()) < 1e-12);
    }

    #[test]
    fn row_major_input_is_decomposed_correctly() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let h = random_hermitian(&mut rng, 12);
        let (w, v) = eigh(&h.view()).unwrap();
        let rebuilt = reassemble(&v.view(), w.as_slice().unwrap());
        assert!(frobenius(&(rebuilt - &h).view()) < 1e-12);
        let s = singular_values(&h.view()).unwrap();
        let top = w.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        assert!((s[0] - top).abs() < 1e-12);
    }
}
