use std::sync::Arc;

use super::{enforce_parity, GradedOperator, Parity, SpectralDecomposition, Tolerances};
use crate::error::{Error, Result};
use crate::linalg;

/// Relative tolerance for deciding that `f` is even or odd on a spectrum.
const SYMMETRY_TOLERANCE: f64 = 1e-12;

/// `f(T) = U diag(f(λ)) U*` for hermitian `T`.
///
/// The parity of the result follows from `T`: functions of even operators are
/// even; for odd `T` the result is even (odd) when `f(−λ) = f(λ)`
/// (`f(−λ) = −f(λ)`) on the spectrum, and untagged otherwise.
pub fn func_calc(f: impl Fn(f64) -> f64, t: &GradedOperator) -> Result<GradedOperator> {
    if !t.is_hermitian() {
        return Err(Error::Contract(
            "functional calculus needs a hermitian operator".into(),
        ));
    }
    let spectrum = t.spectrum()?;
    let mut values = Vec::with_capacity(spectrum.dim());
    for &lam in spectrum.eigenvalues() {
        let v = f(lam);
        if !v.is_finite() {
            return Err(Error::Domain { eigenvalue: lam });
        }
        values.push(v);
    }
    let parity = match t.parity() {
        Parity::Even => Parity::Even,
        Parity::None => Parity::None,
        Parity::Odd => odd_argument_parity(
            &f,
            spectrum.eigenvalues().as_slice().unwrap_or(&[]),
            &values,
        ),
    };
    let mut matrix = linalg::hermitian_part(&spectrum.apply(&values).view());
    if parity != Parity::None {
        enforce_parity(&t.space(), &mut matrix, parity)?;
    }
    let result = GradedOperator::from_raw(t.space(), matrix, parity, true);
    let _ = result
        .spectrum
        .set(Arc::new(SpectralDecomposition::from_unsorted(
            values,
            spectrum.eigenvectors().clone(),
        )));
    Ok(result)
}

fn odd_argument_parity(f: &impl Fn(f64) -> f64, eigenvalues: &[f64], values: &[f64]) -> Parity {
    let scale = values.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    let mut even = true;
    let mut odd = true;
    for (&lam, &v) in eigenvalues.iter().zip(values) {
        let mirrored = f(-lam);
        even &= (mirrored - v).abs() <= SYMMETRY_TOLERANCE * scale;
        odd &= (mirrored + v).abs() <= SYMMETRY_TOLERANCE * scale;
    }
    match (even, odd) {
        (true, _) => Parity::Even,
        (false, true) => Parity::Odd,
        _ => Parity::None,
    }
}

/// `d(T) = DT − TD`.
pub fn lipschitz_derivative(d: &GradedOperator, t: &GradedOperator) -> Result<GradedOperator> {
    let dt = d.compose(t)?;
    let td = t.compose(d)?;
    let matrix = dt.into_matrix() - td.matrix();
    Ok(GradedOperator::from_raw(
        d.space(),
        matrix,
        d.parity().product(t.parity()),
        false,
    ))
}

/// `F_D = D(1 + D²)^{−1/2}`.
pub fn bounded_transform(d: &GradedOperator) -> Result<GradedOperator> {
    func_calc(|x| x / (1.0 + x * x).sqrt(), d)
}

/// Largest singular value, computed blockwise for graded operators.
pub fn operator_norm(t: &GradedOperator) -> Result<f64> {
    if t.is_hermitian() && t.has_cached_spectrum() {
        return Ok(t.spectrum()?.spectral_radius());
    }
    match t.parity() {
        Parity::Even => Ok(linalg::spectral_norm(&t.block_plus_plus())?
            .max(linalg::spectral_norm(&t.block_minus_minus())?)),
        Parity::Odd => {
            let lower = linalg::spectral_norm(&t.block_minus_plus())?;
            if t.is_hermitian() {
                Ok(lower)
            } else {
                Ok(lower.max(linalg::spectral_norm(&t.block_plus_minus())?))
            }
        }
        Parity::None => linalg::spectral_norm(&t.matrix().view()),
    }
}

/// `√T` for positive semidefinite hermitian `T`; eigenvalues in
/// `[−eps_psd·‖T‖, 0)` are clamped to zero.
pub fn sqrt_positive(t: &GradedOperator, tolerances: &Tolerances) -> Result<GradedOperator> {
    if !t.is_hermitian() {
        return Err(Error::Contract(
            "square root needs a hermitian operator".into(),
        ));
    }
    let spectrum = t.spectrum()?;
    let allowance = tolerances.eps_psd * spectrum.spectral_radius();
    if let Some(&lowest) = spectrum.eigenvalues().iter().next() {
        if lowest < -allowance {
            return Err(Error::Negativity {
                eigenvalue: lowest,
                tolerance: allowance,
            });
        }
    }
    func_calc(|x| x.max(0.0).sqrt(), t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{real_diag, C64};
    use crate::operator::GradedSpace;
    use ndarray::{array, Array2};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn diag_op(values: &[f64], n_plus: usize) -> GradedOperator {
        let space = GradedSpace::new(n_plus, values.len() - n_plus).unwrap();
        GradedOperator::hermitian(space, real_diag(values), Parity::Even).unwrap()
    }

    fn rel_diff(a: &Array2<C64>, b: &Array2<C64>) -> f64 {
        linalg::frobenius(&(a - b).view()) / linalg::frobenius(&b.view()).max(1.0)
    }

    #[test]
    fn identity_and_constant_functions() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let space = GradedSpace::new(3, 3).unwrap();
        let t =
            GradedOperator::hermitian(space, linalg::random_hermitian(&mut rng, 6), Parity::None)
                .unwrap();
        let same = func_calc(|x| x, &t).unwrap();
        assert!(rel_diff(same.matrix(), t.matrix()) < 1e-12);
        let one = func_calc(|_| 1.0, &t).unwrap();
        assert!(rel_diff(one.matrix(), &linalg::identity(6)) < 1e-12);
    }

    #[test]
    fn transformation_rule_gives_absolute_value() {
        let t = diag_op(&[-2.0, 3.0], 1);
        let sq = func_calc(|x| x * x, &t).unwrap();
        let abs = func_calc(f64::sqrt, &sq).unwrap();
        assert!(rel_diff(abs.matrix(), &real_diag(&[2.0, 3.0])) < 1e-12);
    }

    #[test]
    fn domain_error_names_the_eigenvalue() {
        let t = diag_op(&[-2.0, 3.0], 1);
        match func_calc(|x| x.ln(), &t) {
            Err(Error::Domain { eigenvalue }) => assert_eq!(eigenvalue, -2.0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_hermitian_is_rejected() {
        let space = GradedSpace::new(1, 1).unwrap();
        let t = GradedOperator::general(
            space,
            array![
                [C64::new(0.0, 0.0), C64::new(1.0, 0.0)],
                [C64::new(0.0, 0.0), C64::new(0.0, 0.0)]
            ],
            Parity::Odd,
        )
        .unwrap();
        assert!(matches!(func_calc(|x| x, &t), Err(Error::Contract(_))));
    }

    #[test]
    fn even_function_of_odd_operator_is_even() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let space = GradedSpace::new(4, 3).unwrap();
        let d0 = linalg::random_complex_matrix(&mut rng, 3, 4);
        let d = GradedOperator::from_odd_block(space, d0.view()).unwrap();
        assert_eq!(func_calc(|x| x * x, &d).unwrap().parity(), Parity::Even);
        assert_eq!(bounded_transform(&d).unwrap().parity(), Parity::Odd);
        assert_eq!(func_calc(|x| x + 1.0, &d).unwrap().parity(), Parity::None);
    }

    #[test]
    fn derivative_of_small_example() {
        let space = GradedSpace::new(1, 1).unwrap();
        let d = GradedOperator::from_odd_block(space, array![[C64::new(1.0, 0.0)]].view()).unwrap();
        let t = diag_op(&[1.0, -1.0], 1);
        let dt = lipschitz_derivative(&d, &t).unwrap();
        let expected = array![
            [C64::new(0.0, 0.0), C64::new(-2.0, 0.0)],
            [C64::new(2.0, 0.0), C64::new(0.0, 0.0)]
        ];
        assert_eq!(dt.matrix(), &expected);
        assert_eq!(dt.parity(), Parity::Odd);
    }

    #[test]
    fn bounded_transform_of_diagonal() {
        let f = bounded_transform(&diag_op(&[1.0, -1.0], 1)).unwrap();
        let s = 1.0 / 2f64.sqrt();
        assert!(rel_diff(f.matrix(), &real_diag(&[s, -s])) < 1e-15);
        let zero = bounded_transform(&diag_op(&[0.0, 0.0], 1)).unwrap();
        assert!(zero.matrix().iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn norms_of_small_examples() {
        assert_eq!(
            operator_norm(&GradedOperator::identity(GradedSpace::new(3, 2).unwrap())).unwrap(),
            1.0
        );
        assert!((operator_norm(&diag_op(&[2.0, -3.0], 1)).unwrap() - 3.0).abs() < 1e-14);
    }

    #[test]
    fn square_roots() {
        let r = sqrt_positive(&diag_op(&[4.0, 0.0], 1), &Tolerances::default()).unwrap();
        assert!(rel_diff(r.matrix(), &real_diag(&[2.0, 0.0])) < 1e-15);
        let clamp = sqrt_positive(&diag_op(&[1.0, -1e-14], 1), &Tolerances::default()).unwrap();
        assert_eq!(clamp.matrix()[[1, 1]].re, 0.0);
        assert!(matches!(
            sqrt_positive(&diag_op(&[1.0, -1e-3], 1), &Tolerances::default()),
            Err(Error::Negativity { .. })
        ));
    }
}
