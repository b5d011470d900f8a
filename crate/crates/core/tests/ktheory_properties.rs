use localizer_core::default_localizer;
use localizer_core::ktheory::{
    half_signature_class, ldl_inertia, localizer_class, localizer_index, matrix_signature,
    trace_class, Coefficient, Inertia, ParamSelection, RelativeClass, TAU_SIG,
};
use localizer_core::linalg::{self, C64};
use localizer_core::localizer::{assemble_localizer, constant_c, DEFAULT_MARGIN};
use localizer_core::models::{mk_block_example, oscillator_dirac, random_instance};
use localizer_core::verify::{perturbed_oscillator, random_problem};
use ndarray::{s, Array2};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_invertible(rng: &mut ChaCha8Rng, n: usize) -> Array2<C64> {
    let u = linalg::random_unitary(rng, n).unwrap();
    let values: Vec<f64> = (0..n)
        .map(|_| {
            let v = rng.gen_range(0.2..2.0);
            if rng.gen_bool(0.5) {
                v
            } else {
                -v
            }
        })
        .collect();
    linalg::reassemble(&u.view(), &values)
}

fn direct_sum(a: &Array2<C64>, b: &Array2<C64>) -> Array2<C64> {
    let (n, m) = (a.nrows(), b.nrows());
    let mut out = Array2::zeros((n + m, n + m));
    out.slice_mut(s![..n, ..n]).assign(a);
    out.slice_mut(s![n.., n..]).assign(b);
    out
}

fn random_class(rng: &mut ChaCha8Rng, n: usize) -> RelativeClass {
    let reference = random_invertible(rng, n);
    let variant = random_invertible(rng, n);
    RelativeClass::new(reference, variant, Coefficient::Complex).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn classes_add_under_direct_sums(seed in any::<u64>(), n in 1usize..8, m in 1usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_class(&mut rng, n);
        let b = random_class(&mut rng, m);
        let sum = RelativeClass::new(
            direct_sum(&a.reference, &b.reference),
            direct_sum(&a.variant, &b.variant),
            Coefficient::Complex,
        )
        .unwrap();
        let total = half_signature_class(&sum, TAU_SIG).unwrap();
        prop_assert_eq!(
            total,
            half_signature_class(&a, TAU_SIG).unwrap() + half_signature_class(&b, TAU_SIG).unwrap()
        );
        prop_assert_eq!(total, trace_class(&sum).unwrap());
    }

    #[test]
    fn factorization_inertia_matches_eigenvalues(seed in any::<u64>(), n in 1usize..24) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_invertible(&mut rng, n);
        let values = linalg::eigvalsh(&m.view()).unwrap();
        let tau = 1e-8 * values.iter().map(|v| v.abs()).fold(0.0, f64::max);
        prop_assert_eq!(ldl_inertia(&m.view(), tau), Inertia::count(values.iter().copied(), tau));
    }

    #[test]
    fn block_reading_forgets_the_subdivision(seed in any::<u64>(), k in 1usize..4, n in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let reference = random_invertible(&mut rng, n * k);
        let variant = random_invertible(&mut rng, n * k);
        let blocks = RelativeClass::new(reference.clone(), variant.clone(), Coefficient::Matrix { k }).unwrap();
        let plain = RelativeClass::new(reference, variant, Coefficient::Complex).unwrap();
        prop_assert_eq!(
            half_signature_class(&blocks, TAU_SIG).unwrap(),
            half_signature_class(&plain, TAU_SIG).unwrap()
        );
    }

    #[test]
    fn projection_classes_count_rank(seed in any::<u64>(), k in 1usize..4) {
        let model = mk_block_example(k, seed).unwrap();
        let (class, rank) = model.relative_class().unwrap();
        prop_assert_eq!(half_signature_class(class, TAU_SIG).unwrap(), rank as i64);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn negated_localizer_has_the_opposite_class_on_balanced_gradings(seed in 0u64..10_000, n in 3usize..20) {
        let problem = random_instance(n, n, 0.05, seed).unwrap().problem().unwrap().clone();
        let phi = default_localizer(0.25).unwrap();
        let rho = problem.d_norm() / 3.0;
        let params = constant_c(1.0, rho, &problem, &phi).unwrap();
        let bundle = assemble_localizer(&problem, &phi, &params).unwrap();
        prop_assume!(bundle.min_abs_eigenvalue > 1e-6);
        let l = bundle.full_matrix().unwrap().into_matrix();
        let gamma = linalg::real_diag(&problem.space().grading_diagonal());
        let minus_gamma = gamma.mapv(|z| -z);
        let forward = RelativeClass::new(minus_gamma.clone(), l.clone(), Coefficient::Complex).unwrap();
        let inverse = RelativeClass::new(minus_gamma, l.mapv(|z| -z), Coefficient::Complex).unwrap();
        let class = half_signature_class(&forward, TAU_SIG).unwrap();
        prop_assert_eq!(class, localizer_class(&bundle).unwrap());
        prop_assert_eq!(half_signature_class(&inverse, TAU_SIG).unwrap(), -class);
    }

    #[test]
    fn index_does_not_depend_on_the_localizing_function(seed in 0u64..10_000) {
        let problem = random_problem(seed, 24).unwrap();
        let wide = default_localizer(0.25).unwrap();
        let narrow = default_localizer(0.125).unwrap();
        let a = localizer_index(&problem, &wide, ParamSelection::Auto { margin: DEFAULT_MARGIN });
        let b = localizer_index(&problem, &narrow, ParamSelection::Auto { margin: 1.5 });
        if let (Ok(a), Ok(b)) = (a, b) {
            prop_assert_eq!(a.value, b.value);
        }
    }
}

#[test]
fn invariance_on_the_oscillator() {
    let wide = default_localizer(0.25).unwrap();
    let narrow = default_localizer(0.125).unwrap();
    for problem in [
        oscillator_dirac(60).unwrap().problem().unwrap().clone(),
        perturbed_oscillator(60, 0.002, 3).unwrap(),
    ] {
        for phi in [&wide, &narrow] {
            let index = localizer_index(&problem, phi, ParamSelection::default()).unwrap();
            assert_eq!(index.value, 1);
        }
    }
}

#[test]
fn signature_of_a_sum_of_blocks() {
    let m = linalg::real_diag(&[3.0, -1.0, 2.0, -0.5, 4.0]);
    let inertia = matrix_signature(&m.view(), TAU_SIG).unwrap();
    assert_eq!(
        (inertia.n_pos, inertia.n_neg, inertia.signature()),
        (3, 2, 1)
    );
}
