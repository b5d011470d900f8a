use std::collections::BTreeMap;
use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::sync::Arc;

use ndarray::{s, Array2};

use super::{guard, ModelDescriptor, ModelPayload};
use crate::error::{Error, Result};
use crate::linalg::{self, C64};
use crate::localizer::IndexProblem;
use crate::operator::{GradedOperator, GradedSpace, SpectralDecomposition};
use crate::oracle::{BlochFamily, GAPLESS_TOLERANCE};

/// Momentum grid used to bound the bulk gap at generation.
const GAP_GRID: usize = 64;

/// `h(k) = sin kx σx + sin ky σy + (m + cos kx + cos ky) σz`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QwzBloch {
    pub m: f64,
}

impl QwzBloch {
    fn vector(&self, kx: f64, ky: f64) -> [f64; 3] {
        [kx.sin(), ky.sin(), self.m + kx.cos() + ky.cos()]
    }

    /// Smallest `|h(k)|` over an `n × n` grid.
    pub fn grid_gap(&self, n: usize) -> f64 {
        let step = 2.0 * PI / n as f64;
        (0..n * n)
            .map(|i| {
                let v = self.vector((i / n) as f64 * step, (i % n) as f64 * step);
                (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
            })
            .fold(f64::INFINITY, f64::min)
    }
}

fn pauli(v: [f64; 3]) -> Array2<C64> {
    let mut h = Array2::zeros((2, 2));
    h[[0, 0]] = C64::new(v[2], 0.0);
    h[[1, 1]] = C64::new(-v[2], 0.0);
    h[[0, 1]] = C64::new(v[0], -v[1]);
    h[[1, 0]] = C64::new(v[0], v[1]);
    h
}

impl BlochFamily for QwzBloch {
    fn bands(&self) -> usize {
        2
    }

    fn hamiltonian(&self, kx: f64, ky: f64) -> Array2<C64> {
        pauli(self.vector(kx, ky))
    }
}

/// Chern insulator on an `L × L` torus paired with the position Dirac
/// operator.
///
/// `H = diag(h, h)` on two copies of `ℓ²(torus) ⊗ ℂ²` where `h = 2P − 1` and
/// `P` is the Fermi projection of [`QwzBloch`]. `D` is odd with
/// `D₀ = X₁ + iX₂` (even to odd copy) and `D₀* = X₁ − iX₂`, positions centred
/// on the lattice. With this orientation the localizer class agrees in sign
/// with the Chern number of the occupied band.
pub fn qwz_chern_model(l: usize, m: f64) -> Result<ModelDescriptor> {
    if l < 8 {
        return Err(Error::Parameter(format!("qwz needs L >= 8, got {l}")));
    }
    if !m.is_finite() {
        return Err(Error::Parameter(format!("mass must be finite, got {m}")));
    }
    let bloch = QwzBloch { m };
    let bulk_gap = bloch.grid_gap(GAP_GRID).min(bloch.grid_gap(l));
    if bulk_gap < GAPLESS_TOLERANCE {
        return Err(Error::Gapless {
            min_gap: bulk_gap,
            kx: f64::NAN,
            ky: f64::NAN,
        });
    }
    let sites = l * l;
    let n = 2 * sites;
    let space = GradedSpace::new(n, n)?;
    let d = position_dirac(l, space)?;
    let h = flattened(l, &bloch, space)?;

    let center = (l as f64 - 1.0) / 2.0;
    let mut boundary = Vec::new();
    let mut boundary_radius = f64::INFINITY;
    for x in 0..l {
        for y in 0..l {
            if x == 0 || y == 0 || x == l - 1 || y == l - 1 {
                let s = x * l + y;
                boundary_radius = boundary_radius.min((x as f64 - center).hypot(y as f64 - center));
                for copy in [0, n] {
                    boundary.extend([copy + 2 * s, copy + 2 * s + 1]);
                }
            }
        }
    }
    let rho_max = boundary_radius / 2.0 * (1.0 - 1e-9);
    guard(&d, &boundary, rho_max)?;

    let problem = IndexProblem::new(h, d)?.with_rho_max(rho_max);
    let mut reports = BTreeMap::new();
    reports.insert("rho_max".into(), rho_max);
    reports.insert("gap_bound".into(), problem.gap());
    reports.insert("bulk_gap".into(), bulk_gap);
    let mut parameters = BTreeMap::new();
    parameters.insert("L".into(), l as f64);
    parameters.insert("m".into(), m);
    Ok(ModelDescriptor {
        name: "qwz".into(),
        parameters,
        payload: ModelPayload::Pairing {
            problem,
            bloch: Some(Arc::new(bloch)),
        },
        reports,
    })
}

fn position_dirac(l: usize, space: GradedSpace) -> Result<GradedOperator> {
    let n = space.n_plus();
    let center = (l as f64 - 1.0) / 2.0;
    let mut d0 = Array2::<C64>::zeros((n, n));
    let mut values = Vec::with_capacity(2 * n);
    let mut vectors = Array2::<C64>::zeros((2 * n, 2 * n));
    for x in 0..l {
        for y in 0..l {
            let z = C64::new(x as f64 - center, y as f64 - center);
            let r = z.norm();
            for orbital in 0..2 {
                let j = 2 * (x * l + y) + orbital;
                d0[[j, j]] = z;
                let (col_plus, col_minus) = (2 * j, 2 * j + 1);
                if r == 0.0 {
                    values.extend([0.0, 0.0]);
                    vectors[[j, col_plus]] = linalg::ONE;
                    vectors[[n + j, col_minus]] = linalg::ONE;
                } else {
                    // D(a e₊ + b e₋) = ±r(a e₊ + b e₋) with a = ±z̄/r, b = 1.
                    let phase = z.conj() / r * FRAC_1_SQRT_2;
                    values.extend([r, -r]);
                    vectors[[j, col_plus]] = phase;
                    vectors[[n + j, col_plus]] = C64::new(FRAC_1_SQRT_2, 0.0);
                    vectors[[j, col_minus]] = -phase;
                    vectors[[n + j, col_minus]] = C64::new(FRAC_1_SQRT_2, 0.0);
                }
            }
        }
    }
    let d = GradedOperator::from_odd_block(space, d0.view())?;
    d.with_spectrum(SpectralDecomposition::from_unsorted(values, vectors), 1e-12)
}

/// `diag(h, h)` with `h = 2P − 1 = −sign(h_B)` built from its Bloch symbol,
/// together with its plane-wave eigenbasis.
fn flattened(l: usize, bloch: &QwzBloch, space: GradedSpace) -> Result<GradedOperator> {
    let sites = l * l;
    let n = 2 * sites;
    let step = 2.0 * PI / l as f64;
    let norm = 1.0 / sites as f64;
    // Bloch frames of −ĥ(k): columns (+1, −1).
    let frames: Vec<(f64, f64, Array2<C64>)> = (0..sites)
        .map(|i| {
            let (kx, ky) = ((i / l) as f64 * step, (i % l) as f64 * step);
            let (_, v) = linalg::eigh(&bloch.hamiltonian(kx, ky).view())?;
            // eigh sorts ascending: column 0 is the occupied band of h_B, which
            // is the +1 eigenvector of −ĥ.
            let mut frame = Array2::zeros((2, 2));
            frame.column_mut(0).assign(&v.column(1));
            frame.column_mut(1).assign(&v.column(0));
            Ok((kx, ky, frame))
        })
        .collect::<Result<_>>()?;

    // h(Δ) = L⁻² Σ_k e^{ik·Δ} (−ĥ(k)) for each displacement Δ on the torus.
    let symbols: Vec<Array2<C64>> = frames
        .iter()
        .map(|(_, _, f)| {
            let mut flat = Array2::<C64>::zeros((2, 2));
            for a in 0..2 {
                for b in 0..2 {
                    flat[[a, b]] = f[[a, 0]] * f[[b, 0]].conj() - f[[a, 1]] * f[[b, 1]].conj();
                }
            }
            flat
        })
        .collect();
    let mut kernel = vec![Array2::<C64>::zeros((2, 2)); sites];
    for (dx, dy) in (0..l).flat_map(|a| (0..l).map(move |b| (a, b))) {
        let acc = &mut kernel[dx * l + dy];
        for ((kx, ky, _), symbol) in frames.iter().zip(&symbols) {
            let phase = C64::from_polar(norm, kx * dx as f64 + ky * dy as f64);
            acc.scaled_add(phase, symbol);
        }
    }
    let mut block = Array2::<C64>::zeros((n, n));
    for (x, y) in (0..l).flat_map(|a| (0..l).map(move |b| (a, b))) {
        for (xp, yp) in (0..l).flat_map(|a| (0..l).map(move |b| (a, b))) {
            let k = &kernel[((x + l - xp) % l) * l + (y + l - yp) % l];
            let (r, c) = (2 * (x * l + y), 2 * (xp * l + yp));
            block.slice_mut(s![r..r + 2, c..c + 2]).assign(k);
        }
    }
    let h = GradedOperator::from_even_blocks(space, block.view(), block.view())?;

    // Plane waves e^{ik·r}/L ⊗ frame columns, eigenvalues −1 then +1.
    let mut values = vec![0.0; 2 * n];
    let mut vectors = Array2::<C64>::zeros((2 * n, 2 * n));
    let amplitude = 1.0 / l as f64;
    for (q, (kx, ky, frame)) in frames.iter().enumerate() {
        for band in 0..2 {
            for copy in 0..2 {
                let col = copy * n + 2 * q + band;
                values[col] = if band == 0 { 1.0 } else { -1.0 };
                for (x, y) in (0..l).flat_map(|a| (0..l).map(move |b| (a, b))) {
                    let wave = C64::from_polar(amplitude, kx * x as f64 + ky * y as f64);
                    for orbital in 0..2 {
                        vectors[[copy * n + 2 * (x * l + y) + orbital, col]] =
                            wave * frame[[orbital, band]];
                    }
                }
            }
        }
    }
    h.with_spectrum(SpectralDecomposition::from_unsorted(values, vectors), 1e-10)
}
