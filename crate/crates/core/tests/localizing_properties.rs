mod common;

use common::reference_weight;
use localizer_core::default_localizer;
use localizer_core::localizing::{default_localizer_with, validate_localizing, QuadratureSettings};
use proptest::prelude::*;

#[test]
fn weight_agrees_with_an_independent_quadrature() {
    let phi = default_localizer(0.25).unwrap();
    let fourier = phi.fourier().unwrap();
    let reference = reference_weight(|x| phi.eval(x), fourier.settings.p_max);
    assert!(
        (reference - fourier.weight).abs() <= 2e-3 * reference,
        "library {} vs reference {reference}",
        fourier.weight
    );
}

#[test]
fn transform_of_an_even_function_is_real() {
    for w in [0.1, 0.125, 0.25] {
        let fourier = default_localizer(w).unwrap().fourier().unwrap().clone();
        assert!(
            fourier.max_imaginary <= 1e-10,
            "w = {w}: {}",
            fourier.max_imaginary
        );
    }
}

#[test]
fn doubling_the_momentum_cutoff_stays_within_the_tail_bound() {
    let base = QuadratureSettings::default();
    let phi = default_localizer_with(0.25, base).unwrap();
    let wide = default_localizer_with(
        0.25,
        QuadratureSettings {
            p_max: 2.0 * base.p_max,
            ..base
        },
    )
    .unwrap();
    let (a, b) = (phi.fourier().unwrap(), wide.fourier().unwrap());
    assert!(
        (b.weight - a.weight).abs() < a.tail_bound,
        "{} vs {} tail {}",
        a.weight,
        b.weight,
        a.tail_bound
    );
}

#[test]
fn default_function_validates() {
    for w in [0.125, 0.25] {
        let report = validate_localizing(&default_localizer(w).unwrap(), 1e-3).unwrap();
        assert!(report.passed, "{report:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn complement_identity(x in -3.0f64..3.0, w in prop::sample::select(vec![0.125, 0.25])) {
        let phi = default_localizer(w).unwrap();
        let g = phi.complement(x);
        prop_assert!((g * g + phi.eval(x).powi(4) - 1.0).abs() <= 1e-12);
        prop_assert_eq!(phi.eval(x), phi.eval(-x));
        prop_assert!((0.0..=1.0).contains(&phi.eval(x)));
    }

    #[test]
    fn monotone_on_the_half_line(a in 0.0f64..1.2, b in 0.0f64..1.2) {
        let phi = default_localizer(0.25).unwrap();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(phi.eval(lo) >= phi.eval(hi));
    }
}
