//! Dense reference computations shared by the integration tests. Everything
//! here works on full matrices from a fresh eigendecomposition of `D`, with
//! no use of the library's window reduction.

#![allow(dead_code)]

use localizer_core::linalg::{self, C64};
use localizer_core::localizer::IndexProblem;
use localizer_core::LocalizingFunction;
use ndarray::Array2;
use std::f64::consts::PI;

pub fn grading(problem: &IndexProblem) -> Array2<C64> {
    linalg::real_diag(&problem.space().grading_diagonal())
}

/// `f(D)` from `D = U diag(λ) U*`.
pub fn function_of_d(problem: &IndexProblem, f: impl Fn(f64) -> f64) -> Array2<C64> {
    let (values, vectors) = linalg::eigh(&problem.d().matrix().view()).unwrap();
    let mapped: Vec<f64> = values.iter().map(|&l| f(l)).collect();
    linalg::reassemble(&vectors.view(), &mapped)
}

pub struct DenseLocalizer {
    pub l: Array2<C64>,
    pub phi1: Array2<C64>,
    pub phi2: Array2<C64>,
}

/// `L = Φ_ρ γH Φ_ρ + κ Φ_{2ρ} D Φ_{2ρ} − (1 − Φ_{2ρ}⁴)^{1/2} γ`.
pub fn dense_localizer(
    problem: &IndexProblem,
    phi: &LocalizingFunction,
    kappa: f64,
    rho: f64,
) -> DenseLocalizer {
    let gamma = grading(problem);
    let h = problem.h().matrix();
    let d = problem.d().matrix();
    let phi1 = function_of_d(problem, |x| phi.eval(x / rho));
    let phi2 = function_of_d(problem, |x| phi.eval(x / (2.0 * rho)));
    let root = function_of_d(problem, |x| {
        (1.0 - phi.eval(x / (2.0 * rho)).powi(4)).max(0.0).sqrt()
    });
    let l = phi1.dot(&gamma).dot(h).dot(&phi1) + phi2.dot(d).dot(&phi2).mapv(|z| z * kappa)
        - root.dot(&gamma);
    DenseLocalizer {
        l: linalg::hermitian_part(&l.view()),
        phi1,
        phi2,
    }
}

fn power(m: &Array2<C64>, k: usize) -> Array2<C64> {
    (1..k).fold(m.clone(), |acc, _| acc.dot(m))
}

/// Right-hand side of the square identity for `L²`.
pub fn square_rhs(problem: &IndexProblem, dense: &DenseLocalizer, kappa: f64) -> Array2<C64> {
    let n = problem.space().dim();
    let one = linalg::identity(n);
    let gamma = grading(problem);
    let h = problem.h().matrix();
    let d = problem.d().matrix();
    let (p1, p2) = (&dense.phi1, &dense.phi2);
    let p2_4 = power(p2, 4);
    let p1_2 = power(p1, 2);
    let dh = d.dot(h) - h.dot(d);
    let p1h = p1.dot(h);
    let inner = p1.dot(h) - h.dot(p1);
    let double = p1h.dot(&inner) - inner.dot(&p1h);
    &one - &p2_4
        + d.dot(d).dot(&p2_4).mapv(|z| z * kappa * kappa)
        + p1_2.dot(h).dot(h).dot(&p1_2)
        + p1.dot(&dh).dot(&gamma).dot(p1).mapv(|z| z * kappa)
        + p1.dot(&double).dot(p1)
}

/// Smallest eigenvalue of `L² − [1 − Φ₂⁴ + (κ²ρ²/4 − C)(Φ₂⁴ − Φ₁⁴) + (g² − C)Φ₁⁴]`.
pub fn lower_bound_margin(
    problem: &IndexProblem,
    dense: &DenseLocalizer,
    kappa: f64,
    rho: f64,
    c: f64,
) -> f64 {
    let n = problem.space().dim();
    let one = linalg::identity(n);
    let g = problem.gap();
    let p1_4 = power(&dense.phi1, 4);
    let p2_4 = power(&dense.phi2, 4);
    let bound = &one - &p2_4
        + (&p2_4 - &p1_4).mapv(|z| z * (kappa * kappa * rho * rho / 4.0 - c))
        + p1_4.mapv(|z| z * (g * g - c));
    let m = dense.l.dot(&dense.l) - bound;
    linalg::eigvalsh(&linalg::hermitian_part(&m.view()).view())
        .unwrap()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

pub fn min_abs_eigenvalue(m: &Array2<C64>) -> f64 {
    linalg::eigvalsh(&m.view())
        .unwrap()
        .iter()
        .map(|v| v.abs())
        .fold(f64::INFINITY, f64::min)
}

/// `½(sign L − sign(−γ))` from a dense eigendecomposition.
pub fn dense_class(problem: &IndexProblem, l: &Array2<C64>) -> i64 {
    let values = linalg::eigvalsh(&l.view()).unwrap();
    let sig: i64 = values.iter().map(|&v| if v > 0.0 { 1 } else { -1 }).sum();
    let reference = -problem.space().grading_signature();
    assert_eq!((sig - reference) % 2, 0);
    (sig - reference) / 2
}

pub fn relative_frobenius(a: &Array2<C64>, b: &Array2<C64>) -> f64 {
    linalg::frobenius(&(a - b).view()) / linalg::frobenius(&b.view()).max(1.0)
}

/// `∫|p·φ̂(p)| dp` by a route independent of the library: `|p·φ̂(p)|` is the
/// modulus of the transform of `φ'`, with `φ'` from central differences and
/// both integrals by the trapezoid rule.
pub fn reference_weight(phi: impl Fn(f64) -> f64, p_max: f64) -> f64 {
    let h = 2e-4;
    let xs: Vec<f64> = (0..=(2.0 / h) as usize)
        .map(|i| -1.0 + i as f64 * h)
        .collect();
    let derivative: Vec<f64> = xs
        .iter()
        .map(|&x| (phi(x + 1e-6) - phi(x - 1e-6)) / 2e-6)
        .collect();
    let dp = 1e-2;
    let steps = (p_max / dp) as usize;
    let mut total = 0.0;
    for k in 0..=steps {
        let p = k as f64 * dp;
        // φ' is odd, so only the sine part of its transform survives.
        let s: f64 = xs
            .iter()
            .zip(&derivative)
            .map(|(&x, &d)| d * (p * x).sin())
            .sum::<f64>()
            * h;
        let value = s.abs() / (2.0 * PI).sqrt();
        let w = if k == 0 || k == steps { 0.5 } else { 1.0 };
        total += 2.0 * w * value * dp;
    }
    total
}
