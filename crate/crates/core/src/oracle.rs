//! Ground-truth indices computed without the localizer: the graded kernel
//! index of `D`, the index of a compression `QD₀Q`, and lattice Chern numbers
//! of Bloch families.

use std::f64::consts::PI;

use ndarray::{s, Array2, ArrayView2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, C64};
use crate::operator::{GradedOperator, Parity};

/// Rank threshold relative to the largest singular value.
pub const TAU_RANK: f64 = 1e-7;
/// Largest discarded over smallest retained singular value for a clear gap.
pub const RANK_GAP_RATIO: f64 = 1e-3;
/// Band gap at the Fermi level below which a Bloch family counts as gapless.
pub const GAPLESS_TOLERANCE: f64 = 1e-8;
/// Relative probe residual of `Q² − Q` accepted for a projection.
const PROJECTION_TOLERANCE: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleMethod {
    GradedKernel,
    Compressed,
    ChernBz,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OracleDiagnostics {
    pub smallest_retained: Option<f64>,
    pub largest_discarded: Option<f64>,
    /// `largest_discarded / smallest_retained`, `0` when nothing is discarded.
    pub gap_ratio: f64,
    /// Smallest band distance from the Fermi level on the momentum grid.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_band_gap: Option<f64>,
    /// Distance of the summed field strength from the nearest integer.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub integrality_defect: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndexResult {
    pub value: i64,
    pub method: OracleMethod,
    pub rank_tolerance: f64,
    pub diagnostics: OracleDiagnostics,
    pub reliable: bool,
}

struct RankCount {
    rank: usize,
    tolerance: f64,
    diagnostics: OracleDiagnostics,
}

fn count_rank(singular: &[f64], tau_rel: f64) -> RankCount {
    let sigma_max = singular.iter().copied().fold(0.0, f64::max);
    let tolerance = tau_rel * sigma_max;
    let retained = singular.iter().copied().filter(|&s| s > tolerance);
    let smallest_retained = retained.clone().reduce(f64::min);
    let rank = retained.count();
    let largest_discarded = singular
        .iter()
        .copied()
        .filter(|&s| s <= tolerance)
        .reduce(f64::max);
    let gap_ratio = match (largest_discarded, smallest_retained) {
        (Some(d), Some(r)) => d / r,
        _ => 0.0,
    };
    RankCount {
        rank,
        tolerance,
        diagnostics: OracleDiagnostics {
            smallest_retained,
            largest_discarded,
            gap_ratio,
            ..OracleDiagnostics::default()
        },
    }
}

/// `dim ker F₀ − dim ker F₀*` for `F₀ : ℂ^cols → ℂ^rows` from the singular
/// values of `f0`, which may be given padded with exact zeros: only the
/// largest `min(rows, cols)` values are read.
fn fredholm_index(
    f0: &ArrayView2<C64>,
    rows: usize,
    cols: usize,
    tau_rel: f64,
    method: OracleMethod,
) -> Result<IndexResult> {
    let mut singular = if f0.is_empty() {
        Vec::new()
    } else {
        linalg::singular_values(f0)?
    };
    singular.sort_by(|a, b| b.total_cmp(a));
    singular.truncate(rows.min(cols));
    let count = count_rank(&singular, tau_rel);
    let kernel = cols - count.rank;
    let cokernel = rows - count.rank;
    Ok(IndexResult {
        value: kernel as i64 - cokernel as i64,
        method,
        rank_tolerance: count.tolerance,
        reliable: count.diagnostics.gap_ratio < RANK_GAP_RATIO,
        diagnostics: count.diagnostics,
    })
}

fn require_odd(d: &GradedOperator) -> Result<()> {
    if d.parity() != Parity::Odd || !d.is_hermitian() {
        return Err(Error::Contract("D must be odd and hermitian".into()));
    }
    Ok(())
}

/// `tr(γ|ker D) = dim ker D₀ − dim ker D₀*`, from the singular values of the
/// block `D₀ : even → odd`.
pub fn graded_kernel_index(d: &GradedOperator, tau_rel: f64) -> Result<IndexResult> {
    require_odd(d)?;
    let d0 = d.block_minus_plus();
    let (rows, cols) = d0.dim();
    fredholm_index(&d0, rows, cols, tau_rel, OracleMethod::GradedKernel)
}

/// Index of `QD₀Q : ran Q₊ → ran Q₋` for an even projection `Q`.
pub fn compressed_index(
    q: &GradedOperator,
    d: &GradedOperator,
    tau_rel: f64,
) -> Result<IndexResult> {
    require_odd(d)?;
    if q.space() != d.space() {
        return Err(Error::Contract("Q and D act on different spaces".into()));
    }
    if q.parity() != Parity::Even || !q.is_hermitian() {
        return Err(Error::Contract(
            "Q must be an even hermitian projection".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x9e);
    let probes = linalg::random_complex_matrix(&mut rng, q.dim(), 4);
    let qx = q.matrix().dot(&probes);
    let idempotency =
        linalg::frobenius(&(q.matrix().dot(&qx) - &qx).view()) / linalg::frobenius(&probes.view());
    if idempotency > PROJECTION_TOLERANCE {
        return Err(Error::Contract(format!(
            "Q is not a projection (probe residual {idempotency:e})"
        )));
    }
    // Q₋D₀Q₊ on the full blocks has the singular values of the compression
    // plus zeros from the complements.
    let rank_of = |block: ArrayView2<C64>| -> Result<usize> {
        let trace: f64 = block.diag().iter().map(|z| z.re).sum();
        let rounded = trace.round();
        if (trace - rounded).abs() > 1e-8 {
            return Err(Error::Contract(format!(
                "projection block has non-integer trace {trace}"
            )));
        }
        Ok(rounded as usize)
    };
    let q_plus = q.block_plus_plus();
    let q_minus = q.block_minus_minus();
    let cols = rank_of(q_plus)?;
    let rows = rank_of(q_minus)?;
    let f0 = q_minus.dot(&linalg::dot_left_sparse(&d.block_minus_plus(), &q_plus));
    fredholm_index(&f0.view(), rows, cols, tau_rel, OracleMethod::Compressed)
}

/// A family of hermitian Bloch matrices on the two-torus.
pub trait BlochFamily: Send + Sync {
    fn bands(&self) -> usize;
    fn hamiltonian(&self, kx: f64, ky: f64) -> Array2<C64>;
}

/// Occupied-band frame and the distance of the spectrum from zero.
fn occupied_frame(family: &dyn BlochFamily, kx: f64, ky: f64) -> Result<(Array2<C64>, f64)> {
    let h = family.hamiltonian(kx, ky);
    let (values, vectors) = linalg::eigh(&h.view())?;
    let occupied = values.iter().filter(|&&v| v < 0.0).count();
    let gap = values.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    Ok((vectors.slice(s![.., ..occupied]).to_owned(), gap))
}

/// Normalized `det(A*B)`.
fn link(a: &Array2<C64>, b: &Array2<C64>) -> C64 {
    let overlap = linalg::adjoint(&a.view()).dot(b);
    let det = determinant(overlap);
    det / det.norm()
}

fn determinant(mut m: Array2<C64>) -> C64 {
    let n = m.nrows();
    let mut det = C64::new(1.0, 0.0);
    for k in 0..n {
        let pivot = (k..n)
            .max_by(|&i, &j| m[[i, k]].norm().total_cmp(&m[[j, k]].norm()))
            .unwrap_or(k);
        if m[[pivot, k]].norm() == 0.0 {
            return C64::new(0.0, 0.0);
        }
        if pivot != k {
            for j in 0..n {
                let t = m[[k, j]];
                m[[k, j]] = m[[pivot, j]];
                m[[pivot, j]] = t;
            }
            det = -det;
        }
        let p = m[[k, k]];
        det *= p;
        for i in (k + 1)..n {
            let factor = m[[i, k]] / p;
            for j in k..n {
                let v = m[[k, j]];
                m[[i, j]] -= factor * v;
            }
        }
    }
    det
}

/// Chern number of the bands below zero from plaquette products of link
/// variables on an `n × n` momentum grid.
pub fn chern_number_bz(family: &dyn BlochFamily, grid_n: usize) -> Result<IndexResult> {
    if grid_n < 2 {
        return Err(Error::Parameter(format!(
            "grid_n must be at least 2, got {grid_n}"
        )));
    }
    let step = 2.0 * PI / grid_n as f64;
    let frames: Vec<(Array2<C64>, f64)> = (0..grid_n * grid_n)
        .into_par_iter()
        .map(|idx| {
            occupied_frame(
                family,
                (idx / grid_n) as f64 * step,
                (idx % grid_n) as f64 * step,
            )
        })
        .collect::<Result<_>>()?;
    let (worst, min_gap) = frames
        .iter()
        .enumerate()
        .map(|(i, (_, g))| (i, *g))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap_or((0, f64::INFINITY));
    if min_gap < GAPLESS_TOLERANCE {
        return Err(Error::Gapless {
            min_gap,
            kx: (worst / grid_n) as f64 * step,
            ky: (worst % grid_n) as f64 * step,
        });
    }
    let occupied = frames[0].0.ncols();
    if frames.iter().any(|(f, _)| f.ncols() != occupied) {
        return Err(Error::Gapless {
            min_gap,
            kx: f64::NAN,
            ky: f64::NAN,
        });
    }
    let at = |i: usize, j: usize| &frames[(i % grid_n) * grid_n + (j % grid_n)].0;
    let curvature: Vec<f64> = (0..grid_n * grid_n)
        .into_par_iter()
        .map(|idx| {
            let (i, j) = (idx / grid_n, idx % grid_n);
            let u1 = link(at(i, j), at(i + 1, j));
            let u2 = link(at(i + 1, j), at(i + 1, j + 1));
            let u3 = link(at(i, j + 1), at(i + 1, j + 1));
            let u4 = link(at(i, j), at(i, j + 1));
            (u1 * u2 / (u3 * u4)).arg()
        })
        .collect();
    let total: f64 = curvature.iter().sum::<f64>() / (2.0 * PI);
    let value = total.round();
    Ok(IndexResult {
        value: value as i64,
        method: OracleMethod::ChernBz,
        rank_tolerance: GAPLESS_TOLERANCE,
        diagnostics: OracleDiagnostics {
            min_band_gap: Some(min_gap),
            integrality_defect: Some((total - value).abs()),
            ..OracleDiagnostics::default()
        },
        reliable: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::GradedSpace;

    struct Constant(Array2<C64>);

    impl BlochFamily for Constant {
        fn bands(&self) -> usize {
            self.0.nrows()
        }

        fn hamiltonian(&self, _: f64, _: f64) -> Array2<C64> {
            self.0.clone()
        }
    }

    #[test]
    fn zero_dirac_counts_the_grading() {
        let space = GradedSpace::new(2, 1).unwrap();
        let d = GradedOperator::zeros(space, Parity::Odd);
        let r = graded_kernel_index(&d, TAU_RANK).unwrap();
        assert_eq!(r.value, 1);
        assert!(r.reliable);
    }

    #[test]
    fn invertible_dirac_has_index_zero() {
        let space = GradedSpace::balanced(3).unwrap();
        let d = GradedOperator::from_odd_block(space, linalg::real_diag(&[1.0, 2.0, 3.0]).view())
            .unwrap();
        assert_eq!(graded_kernel_index(&d, TAU_RANK).unwrap().value, 0);
    }

    #[test]
    fn compressions_by_trivial_projections() {
        let space = GradedSpace::new(3, 2).unwrap();
        let mut d0 = Array2::zeros((2, 3));
        d0[[0, 1]] = C64::new(1.0, 0.0);
        d0[[1, 2]] = C64::new(2.0_f64.sqrt(), 0.0);
        let d = GradedOperator::from_odd_block(space, d0.view()).unwrap();
        let one = GradedOperator::identity(space);
        let zero = GradedOperator::zeros(space, Parity::Even);
        assert_eq!(
            compressed_index(&one, &d, TAU_RANK).unwrap().value,
            graded_kernel_index(&d, TAU_RANK).unwrap().value
        );
        assert_eq!(compressed_index(&zero, &d, TAU_RANK).unwrap().value, 0);
    }

    #[test]
    fn constant_family_is_trivial() {
        let h = linalg::real_diag(&[-1.0, 1.0]);
        let r = chern_number_bz(&Constant(h), 12).unwrap();
        assert_eq!(r.value, 0);
        assert!(r.diagnostics.integrality_defect.unwrap() < 1e-12);
    }

    #[test]
    fn gapless_family_is_rejected() {
        let h = linalg::real_diag(&[0.0, 1.0]);
        assert!(matches!(
            chern_number_bz(&Constant(h), 4),
            Err(Error::Gapless { .. })
        ));
    }

    #[test]
    fn determinant_of_permutation() {
        let mut m = Array2::zeros((3, 3));
        m[[0, 1]] = C64::new(1.0, 0.0);
        m[[1, 0]] = C64::new(1.0, 0.0);
        m[[2, 2]] = C64::new(2.0, 0.0);
        assert!((determinant(m) - C64::new(-2.0, 0.0)).norm() < 1e-15);
    }
}
