use localizer_core::linalg::{self, C64};
use localizer_core::operator::{func_calc, lipschitz_derivative, operator_norm};
use localizer_core::{GradedOperator, GradedSpace, Parity};
use ndarray::{s, Array2};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn rel_frobenius(a: &Array2<C64>, b: &Array2<C64>) -> f64 {
    linalg::frobenius(&(a - b).view()) / linalg::frobenius(&b.view()).max(1.0)
}

fn random_op(rng: &mut ChaCha8Rng, space: GradedSpace, parity: Parity) -> GradedOperator {
    let (np, nm) = (space.n_plus(), space.n_minus());
    match parity {
        Parity::Even => {
            let a = linalg::random_hermitian(rng, np);
            let b = linalg::random_hermitian(rng, nm);
            GradedOperator::from_even_blocks(space, a.view(), b.view()).unwrap()
        }
        Parity::Odd => {
            let d0 = linalg::random_complex_matrix(rng, nm, np);
            GradedOperator::from_odd_block(space, d0.view()).unwrap()
        }
        Parity::None => GradedOperator::hermitian(
            space,
            linalg::random_hermitian(rng, space.dim()),
            Parity::None,
        )
        .unwrap(),
    }
}

fn general(rng: &mut ChaCha8Rng, space: GradedSpace) -> GradedOperator {
    let m = linalg::random_complex_matrix(rng, space.dim(), space.dim());
    GradedOperator::general(space, m, Parity::None).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn polynomials_match_matrix_powers(
        seed in any::<u64>(),
        np in 1usize..8,
        nm in 1usize..8,
        coeffs in prop::collection::vec(-2.0f64..2.0, 5),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let space = GradedSpace::new(np, nm).unwrap();
        let t = random_op(&mut rng, space, Parity::None);
        let p = |x: f64| coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c);
        let computed = func_calc(p, &t).unwrap();
        let n = space.dim();
        let mut direct = Array2::<C64>::zeros((n, n));
        let mut power = linalg::identity(n);
        for c in &coeffs {
            direct = direct + power.mapv(|z| z * *c);
            power = power.dot(t.matrix());
        }
        prop_assert!(rel_frobenius(computed.matrix(), &direct) <= 1e-9);
    }

    #[test]
    fn parity_products_keep_block_sparsity(seed in any::<u64>(), np in 1usize..7, nm in 1usize..7) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let space = GradedSpace::new(np, nm).unwrap();
        let e1 = random_op(&mut rng, space, Parity::Even);
        let e2 = random_op(&mut rng, space, Parity::Even);
        let o = random_op(&mut rng, space, Parity::Odd);
        let ee = e1.compose(&e2).unwrap();
        let eo = e1.compose(&o).unwrap();
        let oo = o.compose(&o).unwrap();
        prop_assert_eq!(ee.parity(), Parity::Even);
        prop_assert_eq!(eo.parity(), Parity::Odd);
        prop_assert_eq!(oo.parity(), Parity::Even);
        let zero = C64::new(0.0, 0.0);
        for m in [ee.matrix(), oo.matrix()] {
            prop_assert!(m.slice(s![..np, np..]).iter().all(|z| *z == zero));
            prop_assert!(m.slice(s![np.., ..np]).iter().all(|z| *z == zero));
        }
        prop_assert!(eo.matrix().slice(s![..np, ..np]).iter().all(|z| *z == zero));
        prop_assert!(eo.matrix().slice(s![np.., np..]).iter().all(|z| *z == zero));
    }

    #[test]
    fn derivative_is_a_star_derivation(seed in any::<u64>(), np in 1usize..7, nm in 1usize..7) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let space = GradedSpace::new(np, nm).unwrap();
        let d = random_op(&mut rng, space, Parity::Odd);
        let a = general(&mut rng, space);
        let b = general(&mut rng, space);
        let lhs = lipschitz_derivative(&d, &a.compose(&b).unwrap()).unwrap();
        let rhs = lipschitz_derivative(&d, &a).unwrap().compose(&b).unwrap().matrix()
            + a.compose(&lipschitz_derivative(&d, &b).unwrap()).unwrap().matrix();
        prop_assert!(linalg::frobenius(&(lhs.matrix() - &rhs).view()) <= 1e-10 * linalg::frobenius(&rhs.view()).max(1.0));
        let star = lipschitz_derivative(&d, &a.adjoint()).unwrap();
        let minus_adjoint = lipschitz_derivative(&d, &a).unwrap().adjoint().matrix().mapv(|z| -z);
        prop_assert!(linalg::frobenius(&(star.matrix() - &minus_adjoint).view()) <= 1e-10);
    }

    #[test]
    fn functional_calculus_is_unitarily_covariant(seed in any::<u64>(), n in 2usize..10) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let space = GradedSpace::new(n, 0).unwrap();
        let t = random_op(&mut rng, space, Parity::None);
        let u = linalg::random_unitary(&mut rng, n).unwrap();
        let u_adj = linalg::adjoint(&u.view());
        let conj = GradedOperator::hermitian(space, u.dot(t.matrix()).dot(&u_adj), Parity::None).unwrap();
        let f = |x: f64| (x * 1.3).sin() + x.abs().sqrt();
        let lhs = func_calc(f, &conj).unwrap();
        let rhs = u.dot(func_calc(f, &t).unwrap().matrix()).dot(&u_adj);
        prop_assert!(rel_frobenius(lhs.matrix(), &rhs) <= 1e-9);
    }

    #[test]
    fn norm_is_the_largest_singular_value(seed in any::<u64>(), np in 1usize..6, nm in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let space = GradedSpace::new(np, nm).unwrap();
        let t = random_op(&mut rng, space, Parity::Odd);
        let expected = linalg::singular_values(&t.block_minus_plus().to_owned().view()).unwrap()
            .into_iter().fold(0.0, f64::max);
        prop_assert!((operator_norm(&t).unwrap() - expected).abs() <= 1e-10 * expected.max(1.0));
    }
}
