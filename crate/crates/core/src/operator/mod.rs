//! Finite-dimensional graded operators.
//!
//! A [`GradedSpace`] is `C^{n_plus} ⊕ C^{n_minus}` with grading
//! `γ = diag(+1, …, +1, −1, …, −1)`. Operators are dense complex matrices
//! tagged with their parity relative to `γ`. Even operators are
//! block-diagonal, odd operators block-off-diagonal, and constructors enforce
//! the block pattern exactly so parity bookkeeping never drifts.

mod calculus;
mod io;
mod spectral;

use std::fmt;
use std::sync::{Arc, OnceLock};

use ndarray::{s, Array2, ArrayView2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, C64};

pub use calculus::{
    bounded_transform, func_calc, lipschitz_derivative, operator_norm, sqrt_positive,
};
pub use io::{read_matrix_csv, write_matrix_csv, OperatorMetadata};
pub use spectral::SpectralDecomposition;

/// Relative size below which a forbidden parity block is treated as roundoff.
pub const PARITY_TOLERANCE: f64 = 1e-9;

/// Numerical tolerances of the functional calculus.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Relative reconstruction tolerance for eigendecompositions.
    pub eps_eig: f64,
    /// Negativity allowance for square roots, relative to `‖T‖`.
    pub eps_psd: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            eps_eig: 1e-10,
            eps_psd: 1e-10,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GradedSpace {
    n_plus: usize,
    n_minus: usize,
}

impl GradedSpace {
    pub fn new(n_plus: usize, n_minus: usize) -> Result<Self> {
        if n_plus + n_minus == 0 {
            return Err(Error::Contract("graded space must be non-trivial".into()));
        }
        Ok(Self { n_plus, n_minus })
    }

    /// Balanced space `C^n ⊕ C^n`.
    pub fn balanced(n: usize) -> Result<Self> {
        Self::new(n, n)
    }

    pub fn n_plus(&self) -> usize {
        self.n_plus
    }

    pub fn n_minus(&self) -> usize {
        self.n_minus
    }

    pub fn dim(&self) -> usize {
        self.n_plus + self.n_minus
    }

    /// Diagonal of `γ`.
    pub fn grading_diagonal(&self) -> Vec<f64> {
        let mut d = vec![1.0; self.n_plus];
        d.extend(std::iter::repeat(-1.0).take(self.n_minus));
        d
    }

    /// `sign(γ) = n_plus − n_minus`.
    pub fn grading_signature(&self) -> i64 {
        self.n_plus as i64 - self.n_minus as i64
    }

    /// Direct sum, with even parts first: `(X ⊕ Y)_± = X_± ⊕ Y_±`.
    pub fn direct_sum(&self, other: &GradedSpace) -> GradedSpace {
        GradedSpace {
            n_plus: self.n_plus + other.n_plus,
            n_minus: self.n_minus + other.n_minus,
        }
    }
}

impl fmt::Display for GradedSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "C^{} ⊕ C^{}", self.n_plus, self.n_minus)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
    None,
}

impl Parity {
    pub fn product(self, other: Parity) -> Parity {
        match (self, other) {
            (Parity::Even, Parity::Even) | (Parity::Odd, Parity::Odd) => Parity::Even,
            (Parity::Even, Parity::Odd) | (Parity::Odd, Parity::Even) => Parity::Odd,
            _ => Parity::None,
        }
    }

    pub fn sum(self, other: Parity) -> Parity {
        if self == other {
            self
        } else {
            Parity::None
        }
    }
}

#[derive(Clone, Debug)]
pub struct GradedOperator {
    matrix: Array2<C64>,
    space: GradedSpace,
    parity: Parity,
    hermitian: bool,
    spectrum: OnceLock<Arc<SpectralDecomposition>>,
}

impl GradedOperator {
    /// Hermitian operator; the input is symmetrized and, for a declared
    /// parity, the forbidden blocks are checked to be roundoff and zeroed.
    pub fn hermitian(space: GradedSpace, matrix: Array2<C64>, parity: Parity) -> Result<Self> {
        check_shape(&space, &matrix)?;
        let mut matrix = linalg::hermitian_part(&matrix.view());
        enforce_parity(&space, &mut matrix, parity)?;
        Ok(Self::from_raw(space, matrix, parity, true))
    }

    pub fn general(space: GradedSpace, matrix: Array2<C64>, parity: Parity) -> Result<Self> {
        check_shape(&space, &matrix)?;
        let mut matrix = matrix;
        enforce_parity(&space, &mut matrix, parity)?;
        Ok(Self::from_raw(space, matrix, parity, false))
    }

    /// Odd hermitian `[[0, D₀*], [D₀, 0]]` from `D₀ : C^{n_plus} → C^{n_minus}`.
    pub fn from_odd_block(space: GradedSpace, d0: ArrayView2<C64>) -> Result<Self> {
        let (np, nm) = (space.n_plus(), space.n_minus());
        if d0.dim() != (nm, np) {
            return Err(Error::Contract(format!(
                "odd block has shape {:?}, expected ({nm}, {np})",
                d0.dim()
            )));
        }
        let mut m = Array2::zeros((space.dim(), space.dim()));
        m.slice_mut(s![np.., ..np]).assign(&d0);
        m.slice_mut(s![..np, np..]).assign(&linalg::adjoint(&d0));
        Ok(Self::from_raw(space, m, Parity::Odd, true))
    }

    /// Even hermitian `diag(A₊, A₋)`.
    pub fn from_even_blocks(
        space: GradedSpace,
        plus: ArrayView2<C64>,
        minus: ArrayView2<C64>,
    ) -> Result<Self> {
        let (np, nm) = (space.n_plus(), space.n_minus());
        if plus.dim() != (np, np) || minus.dim() != (nm, nm) {
            return Err(Error::Contract(
                "even blocks do not match the grading".into(),
            ));
        }
        let mut m = Array2::zeros((space.dim(), space.dim()));
        m.slice_mut(s![..np, ..np])
            .assign(&linalg::hermitian_part(&plus));
        m.slice_mut(s![np.., np..])
            .assign(&linalg::hermitian_part(&minus));
        Ok(Self::from_raw(space, m, Parity::Even, true))
    }

    pub fn identity(space: GradedSpace) -> Self {
        Self::from_raw(space, linalg::identity(space.dim()), Parity::Even, true)
    }

    /// The grading operator `γ`.
    pub fn grading(space: GradedSpace) -> Self {
        let op = Self::from_raw(
            space,
            linalg::real_diag(&space.grading_diagonal()),
            Parity::Even,
            true,
        );
        let mut values = space.grading_diagonal();
        let mut order: Vec<usize> = (0..values.len()).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        values.sort_by(f64::total_cmp);
        let n = space.dim();
        let mut vectors = Array2::zeros((n, n));
        for (col, &row) in order.iter().enumerate() {
            vectors[[row, col]] = linalg::ONE;
        }
        let _ = op.spectrum.set(Arc::new(SpectralDecomposition::from_sorted(
            values.into(),
            vectors,
        )));
        op
    }

    pub fn zeros(space: GradedSpace, parity: Parity) -> Self {
        let n = space.dim();
        Self::from_raw(space, Array2::zeros((n, n)), parity, true)
    }

    pub(crate) fn from_raw(
        space: GradedSpace,
        matrix: Array2<C64>,
        parity: Parity,
        hermitian: bool,
    ) -> Self {
        Self {
            matrix,
            space,
            parity,
            hermitian,
            spectrum: OnceLock::new(),
        }
    }

    pub fn matrix(&self) -> &Array2<C64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> Array2<C64> {
        self.matrix
    }

    pub fn space(&self) -> GradedSpace {
        self.space
    }

    pub fn parity(&self) -> Parity {
        self.parity
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    /// Lower-left block `C^{n_plus} → C^{n_minus}`; for odd `D` this is `D₀`.
    pub fn block_minus_plus(&self) -> ArrayView2<'_, C64> {
        let np = self.space.n_plus();
        self.matrix.slice(s![np.., ..np])
    }

    pub fn block_plus_minus(&self) -> ArrayView2<'_, C64> {
        let np = self.space.n_plus();
        self.matrix.slice(s![..np, np..])
    }

    pub fn block_plus_plus(&self) -> ArrayView2<'_, C64> {
        let np = self.space.n_plus();
        self.matrix.slice(s![..np, ..np])
    }

    pub fn block_minus_minus(&self) -> ArrayView2<'_, C64> {
        let np = self.space.n_plus();
        self.matrix.slice(s![np.., np..])
    }

    /// Cached eigendecomposition (hermitian operators only).
    pub fn spectrum(&self) -> Result<Arc<SpectralDecomposition>> {
        if let Some(s) = self.spectrum.get() {
            return Ok(s.clone());
        }
        if !self.hermitian {
            return Err(Error::Contract(
                "spectral decomposition requested for a non-hermitian operator".into(),
            ));
        }
        let decomposition = Arc::new(SpectralDecomposition::compute(&self.matrix.view())?);
        Ok(self.spectrum.get_or_init(|| decomposition).clone())
    }

    pub fn has_cached_spectrum(&self) -> bool {
        self.spectrum.get().is_some()
    }

    /// Attach a decomposition known by construction (e.g. analytically).
    ///
    /// The decomposition is checked against the matrix with seeded random
    /// probe vectors: `‖(UΛU* − T)x‖ ≤ eps·‖T‖·‖x‖` and `‖U*Ux − x‖ ≤ eps·‖x‖`.
    pub fn with_spectrum(self, decomposition: SpectralDecomposition, eps: f64) -> Result<Self> {
        if !self.hermitian {
            return Err(Error::Contract(
                "only hermitian operators carry spectra".into(),
            ));
        }
        if decomposition.dim() != self.dim() {
            return Err(Error::Contract("decomposition dimension mismatch".into()));
        }
        let scale = decomposition
            .eigenvalues()
            .iter()
            .fold(0.0_f64, |m, v| m.max(v.abs()))
            .max(1e-300);
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        let u = decomposition.eigenvectors();
        let u_adj = linalg::adjoint(&u.view());
        for _ in 0..4 {
            let x = linalg::random_complex_matrix(&mut rng, self.dim(), 1);
            let xn = linalg::frobenius(&x.view());
            let mut coeff = u_adj.dot(&x);
            let orth = linalg::frobenius(&(u.dot(&coeff) - &x).view());
            for (i, &lam) in decomposition.eigenvalues().iter().enumerate() {
                coeff[[i, 0]] *= lam;
            }
            let residual = linalg::frobenius(&(u.dot(&coeff) - self.matrix.dot(&x)).view());
            if residual > eps * scale * xn || orth > eps * xn {
                return Err(Error::InternalConsistency(format!(
                    "supplied decomposition fails probe: residual {residual:e}, orthogonality {orth:e}"
                )));
            }
        }
        let _ = self.spectrum.set(Arc::new(decomposition));
        Ok(self)
    }

    pub fn adjoint(&self) -> GradedOperator {
        if self.hermitian {
            return self.clone();
        }
        Self::from_raw(
            self.space,
            linalg::adjoint(&self.matrix.view()),
            self.parity,
            false,
        )
    }

    pub fn compose(&self, other: &GradedOperator) -> Result<GradedOperator> {
        self.check_same_space(other)?;
        Ok(Self::from_raw(
            self.space,
            self.matrix.dot(&other.matrix),
            self.parity.product(other.parity),
            false,
        ))
    }

    pub fn add(&self, other: &GradedOperator) -> Result<GradedOperator> {
        self.check_same_space(other)?;
        Ok(Self::from_raw(
            self.space,
            &self.matrix + &other.matrix,
            self.parity.sum(other.parity),
            self.hermitian && other.hermitian,
        ))
    }

    pub fn sub(&self, other: &GradedOperator) -> Result<GradedOperator> {
        self.check_same_space(other)?;
        Ok(Self::from_raw(
            self.space,
            &self.matrix - &other.matrix,
            self.parity.sum(other.parity),
            self.hermitian && other.hermitian,
        ))
    }

    pub fn scale(&self, factor: f64) -> GradedOperator {
        Self::from_raw(
            self.space,
            self.matrix.mapv(|z| z * factor),
            self.parity,
            self.hermitian,
        )
    }

    /// Re-tag a product or sum that is known to be hermitian (symmetrizes).
    pub fn into_hermitian(self) -> Result<GradedOperator> {
        Self::hermitian(self.space, self.matrix, self.parity)
    }

    /// `γ T γ`.
    pub fn grading_conjugate(&self) -> GradedOperator {
        let g = self.space.grading_diagonal();
        let m = Array2::from_shape_fn(self.matrix.dim(), |(i, j)| {
            self.matrix[[i, j]] * g[i] * g[j]
        });
        Self::from_raw(self.space, m, self.parity, self.hermitian)
    }

    /// Direct sum `T ⊕ S` with even parts first.
    pub fn direct_sum(&self, other: &GradedOperator) -> GradedOperator {
        let space = self.space.direct_sum(&other.space);
        let (ap, bp) = (self.space.n_plus(), other.space.n_plus());
        let a_idx = |i: usize| if i < ap { i } else { i + bp };
        let b_idx = |i: usize| if i < bp { ap + i } else { self.dim() + i };
        let mut m = Array2::zeros((space.dim(), space.dim()));
        for ((i, j), &v) in self.matrix.indexed_iter() {
            m[[a_idx(i), a_idx(j)]] = v;
        }
        for ((i, j), &v) in other.matrix.indexed_iter() {
            m[[b_idx(i), b_idx(j)]] = v;
        }
        Self::from_raw(
            space,
            m,
            self.parity.sum(other.parity),
            self.hermitian && other.hermitian,
        )
    }

    /// `T·M` for a block of column vectors, using the parity block structure
    /// and sparsity of the blocks.
    pub fn apply(&self, m: &ArrayView2<C64>) -> Result<Array2<C64>> {
        if m.nrows() != self.dim() {
            return Err(Error::Contract(format!(
                "cannot apply a {}-dimensional operator to {} rows",
                self.dim(),
                m.nrows()
            )));
        }
        let np = self.space.n_plus();
        let top = m.slice(s![..np, ..]);
        let bottom = m.slice(s![np.., ..]);
        let mut out = Array2::zeros(m.dim());
        match self.parity {
            Parity::Even => {
                out.slice_mut(s![..np, ..])
                    .assign(&linalg::dot_left_sparse(&self.block_plus_plus(), &top));
                out.slice_mut(s![np.., ..])
                    .assign(&linalg::dot_left_sparse(&self.block_minus_minus(), &bottom));
            }
            Parity::Odd => {
                out.slice_mut(s![..np, ..])
                    .assign(&linalg::dot_left_sparse(&self.block_plus_minus(), &bottom));
                out.slice_mut(s![np.., ..])
                    .assign(&linalg::dot_left_sparse(&self.block_minus_plus(), &top));
            }
            Parity::None => out.assign(&linalg::dot_left_sparse(&self.matrix.view(), m)),
        }
        Ok(out)
    }

    fn check_same_space(&self, other: &GradedOperator) -> Result<()> {
        if self.space != other.space {
            return Err(Error::Contract(format!(
                "operators act on different spaces: {} vs {}",
                self.space, other.space
            )));
        }
        Ok(())
    }
}

fn check_shape(space: &GradedSpace, matrix: &Array2<C64>) -> Result<()> {
    let n = space.dim();
    if matrix.dim() != (n, n) {
        return Err(Error::Contract(format!(
            "matrix shape {:?} does not match {space}",
            matrix.dim()
        )));
    }
    Ok(())
}

/// Zero the blocks a parity forbids, after checking they only hold roundoff.
fn enforce_parity(space: &GradedSpace, matrix: &mut Array2<C64>, parity: Parity) -> Result<()> {
    let np = space.n_plus();
    let total = linalg::frobenius(&matrix.view()).max(1.0);
    let forbidden: [(usize, usize, usize, usize); 2] = match parity {
        Parity::None => return Ok(()),
        Parity::Even => [(0, np, np, space.dim()), (np, space.dim(), 0, np)],
        Parity::Odd => [(0, np, 0, np), (np, space.dim(), np, space.dim())],
    };
    for &(r0, r1, c0, c1) in &forbidden {
        let block = matrix.slice(s![r0..r1, c0..c1]);
        let size = linalg::frobenius(&block);
        if size > PARITY_TOLERANCE * total {
            return Err(Error::Contract(format!(
                "declared {parity:?} operator has forbidden block of norm {size:e}"
            )));
        }
    }
    for &(r0, r1, c0, c1) in &forbidden {
        matrix.slice_mut(s![r0..r1, c0..c1]).fill(linalg::ZERO);
    }
    Ok(())
}

/// Parity of `T` detected from its blocks (exact zero test).
pub fn detect_parity(op: &GradedOperator) -> Parity {
    let zero = |v: ArrayView2<C64>| v.iter().all(|z| *z == linalg::ZERO);
    let diag_zero = zero(op.block_plus_plus()) && zero(op.block_minus_minus());
    let off_zero = zero(op.block_plus_minus()) && zero(op.block_minus_plus());
    match (off_zero, diag_zero) {
        (true, _) => Parity::Even,
        (false, true) => Parity::Odd,
        _ => Parity::None,
    }
}
