//! Bunch–Kaufman symmetric-pivoting `LDL*` factorization of hermitian
//! matrices, used to read off inertia by Sylvester's law independently of the
//! eigensolver.

use ndarray::ArrayView2;

use super::Inertia;
use crate::linalg::C64;

const ALPHA: f64 = 0.640_388_203_202_208_4; // (1 + √17)/8

struct Dense {
    n: usize,
    a: Vec<C64>,
}

impl Dense {
    #[inline]
    fn at(&self, i: usize, j: usize) -> C64 {
        self.a[i * self.n + j]
    }

    #[inline]
    fn set(&mut self, i: usize, j: usize, v: C64) {
        self.a[i * self.n + j] = v;
    }

    fn swap(&mut self, p: usize, q: usize) {
        if p == q {
            return;
        }
        let n = self.n;
        for j in 0..n {
            self.a.swap(p * n + j, q * n + j);
        }
        for i in 0..n {
            self.a.swap(i * n + p, i * n + q);
        }
    }
}

/// Inertia of the hermitian matrix `a` from the pivots of its Bunch–Kaufman
/// factorization; pivot eigenvalues within `tau` of zero count as zero.
pub fn ldl_inertia(a: &ArrayView2<C64>, tau: f64) -> Inertia {
    let n = a.nrows();
    let mut m = Dense {
        n,
        a: a.iter().copied().collect(),
    };
    if !a.is_standard_layout() {
        m.a = (0..n * n).map(|idx| a[[idx / n, idx % n]]).collect();
    }
    let mut inertia = Inertia::default();
    let tally = |x: f64, inertia: &mut Inertia| {
        if x > tau {
            inertia.n_pos += 1;
        } else if x < -tau {
            inertia.n_neg += 1;
        } else {
            inertia.n_zero += 1;
        }
    };

    let mut k = 0;
    while k < n {
        let absakk = m.at(k, k).re.abs();
        let (r, colmax) =
            ((k + 1)..n)
                .map(|i| (i, m.at(i, k).norm()))
                .fold(
                    (k, 0.0),
                    |best, cur| if cur.1 > best.1 { cur } else { best },
                );
        if absakk.max(colmax) == 0.0 {
            tally(0.0, &mut inertia);
            k += 1;
            continue;
        }
        let two_by_two = if absakk >= ALPHA * colmax {
            false
        } else {
            let rowmax = (k..n)
                .filter(|&j| j != r)
                .map(|j| m.at(r, j).norm())
                .fold(0.0, f64::max);
            if absakk * rowmax >= ALPHA * colmax * colmax {
                false
            } else if m.at(r, r).re.abs() >= ALPHA * rowmax {
                m.swap(k, r);
                false
            } else {
                m.swap(k + 1, r);
                true
            }
        };

        if !two_by_two {
            let d = m.at(k, k).re;
            tally(d, &mut inertia);
            for i in (k + 1)..n {
                let lik = m.at(i, k) / d;
                if lik == C64::new(0.0, 0.0) {
                    continue;
                }
                for j in (k + 1)..n {
                    let v = m.at(i, j) - lik * m.at(k, j);
                    m.set(i, j, v);
                }
            }
            k += 1;
        } else {
            let a11 = m.at(k, k).re;
            let a22 = m.at(k + 1, k + 1).re;
            let b = m.at(k + 1, k);
            let det = a11 * a22 - b.norm_sqr();
            let half_trace = 0.5 * (a11 + a22);
            let disc = (0.25 * (a11 - a22).powi(2) + b.norm_sqr()).sqrt();
            tally(half_trace + disc, &mut inertia);
            tally(half_trace - disc, &mut inertia);
            // E⁻¹ = [[a22, −b*], [−b, a11]] / det with b = E₂₁.
            let inv11 = C64::new(a22 / det, 0.0);
            let inv22 = C64::new(a11 / det, 0.0);
            let inv12 = -b.conj() / det;
            let inv21 = -b / det;
            for i in (k + 2)..n {
                let c1 = m.at(i, k);
                let c2 = m.at(i, k + 1);
                let w1 = c1 * inv11 + c2 * inv21;
                let w2 = c1 * inv12 + c2 * inv22;
                for j in (k + 2)..n {
                    let v = m.at(i, j) - w1 * m.at(k, j) - w2 * m.at(k + 1, j);
                    m.set(i, j, v);
                }
            }
            k += 2;
        }
    }
    inertia
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn agrees_with_eigenvalue_counts() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for n in [1, 2, 5, 17, 40] {
            let a = linalg::random_hermitian(&mut rng, n);
            let w = linalg::eigvalsh(&a.view()).unwrap();
            let by_eig = Inertia::count(w.iter().copied(), 1e-12);
            assert_eq!(ldl_inertia(&a.view(), 1e-12), by_eig, "n = {n}");
        }
    }

    #[test]
    fn zero_diagonal_forces_two_by_two_pivots() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let mut a = linalg::random_hermitian(&mut rng, 8);
        for i in 0..8 {
            a[[i, i]] = C64::new(0.0, 0.0);
        }
        let w = linalg::eigvalsh(&a.view()).unwrap();
        assert_eq!(
            ldl_inertia(&a.view(), 1e-12),
            Inertia::count(w.iter().copied(), 1e-12)
        );
    }

    #[test]
    fn semidefinite_zero_block() {
        let a = linalg::real_diag(&[2.0, 0.0, -1.0]);
        let i = ldl_inertia(&a.view(), 1e-12);
        assert_eq!((i.n_pos, i.n_neg, i.n_zero), (1, 1, 1));
    }
}
