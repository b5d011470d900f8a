use std::collections::BTreeMap;

use ndarray::{s, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ModelDescriptor, ModelPayload};
use crate::error::{Error, Result};
use crate::ktheory::{Coefficient, RelativeClass};
use crate::linalg::{self, C64};
use crate::localizer::IndexProblem;
use crate::operator::{GradedOperator, GradedSpace, Parity};

/// Coupling of the random perturbation in `random:` models when none is given.
pub const DEFAULT_STRENGTH: f64 = 0.05;
/// Width in `|λ|` of the spectral blocks of `D` used for the commuting part.
pub const BLOCKING_WIDTH: f64 = 1.0;
const MAX_ATTEMPTS: usize = 20;
/// Required `gap(H)/‖H‖`.
const MIN_RELATIVE_GAP: f64 = 0.1;

/// A generated `H` with its measured `‖d(H)‖`.
#[derive(Clone, Debug)]
pub struct RandomLipschitz {
    pub h: GradedOperator,
    pub dh_norm: f64,
    pub blocking_width: f64,
    pub attempts: usize,
}

fn random_even(rng: &mut ChaCha8Rng, space: GradedSpace) -> Result<GradedOperator> {
    let plus = linalg::random_hermitian(rng, space.n_plus());
    let minus = linalg::random_hermitian(rng, space.n_minus());
    GradedOperator::from_even_blocks(space, plus.view(), minus.view())
}

/// `H = V + strength·W` where `V = f(|D|)` is constant on blocks of `|λ|` of
/// width [`BLOCKING_WIDTH`] (so `d(V) = 0`) with values in `±[1, 2]`, and `W`
/// is a random even hermitian of norm one. Regenerated until
/// `gap(H) ≥ 0.1·‖H‖`.
pub fn random_lipschitz(d: &GradedOperator, strength: f64, seed: u64) -> Result<RandomLipschitz> {
    if !(strength >= 0.0 && strength.is_finite()) {
        return Err(Error::Parameter(format!(
            "strength must be non-negative, got {strength}"
        )));
    }
    if d.parity() != Parity::Odd || !d.is_hermitian() {
        return Err(Error::Contract("D must be odd and hermitian".into()));
    }
    let space = d.space();
    let spectrum = d.spectrum()?;
    let bins: Vec<usize> = spectrum
        .eigenvalues()
        .iter()
        .map(|l| (l.abs() / BLOCKING_WIDTH).floor() as usize)
        .collect();
    let n_bins = bins.iter().copied().max().unwrap_or(0) + 1;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut last_ratio = 0.0;
    for attempt in 1..=MAX_ATTEMPTS {
        let levels: Vec<f64> = (0..n_bins)
            .map(|_| {
                let magnitude = rng.gen_range(1.0..2.0);
                if rng.gen_bool(0.5) {
                    magnitude
                } else {
                    -magnitude
                }
            })
            .collect();
        let values: Vec<f64> = bins.iter().map(|&b| levels[b]).collect();
        let v = spectrum.apply(&values);
        let v = GradedOperator::hermitian(space, v, Parity::Even)?;
        let w = random_even(&mut rng, space)?;
        let w_norm = linalg::spectral_norm(&w.matrix().view())?;
        let h = if strength == 0.0 || w_norm == 0.0 {
            v
        } else {
            v.add(&w.scale(strength / w_norm))?.into_hermitian()?
        };
        let h = GradedOperator::hermitian(space, h.into_matrix(), Parity::Even)?;
        let eigenvalues = h.spectrum()?;
        let norm = eigenvalues.spectral_radius();
        let gap = eigenvalues.min_abs();
        last_ratio = gap / norm;
        if gap >= MIN_RELATIVE_GAP * norm {
            let d0 = d.block_minus_plus();
            let commutator = linalg::dot_left_sparse(&d0, &h.block_plus_plus())
                - linalg::dot_right_sparse(&h.block_minus_minus(), &d0);
            let dh_norm = linalg::spectral_norm(&commutator.view())?;
            return Ok(RandomLipschitz {
                h,
                dh_norm,
                blocking_width: BLOCKING_WIDTH,
                attempts: attempt,
            });
        }
    }
    Err(Error::Generation(format!(
        "no H with gap >= {MIN_RELATIVE_GAP}·‖H‖ after {MAX_ATTEMPTS} attempts (last ratio {last_ratio:.3e})"
    )))
}

/// Random odd `D` on `GradedSpace(n_plus, n_minus)` with singular values of
/// `D₀` spread over `[0.5, 0.5 + min(n_plus, n_minus)/2]`, and
/// `H = random_lipschitz(D, strength)`.
pub fn random_instance(
    n_plus: usize,
    n_minus: usize,
    strength: f64,
    seed: u64,
) -> Result<ModelDescriptor> {
    let space = GradedSpace::new(n_plus, n_minus)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x0dd_d1ac);
    let rank = n_plus.min(n_minus);
    let left = linalg::random_unitary(&mut rng, n_minus)?;
    let right = linalg::random_unitary(&mut rng, n_plus)?;
    let mut sigma = Array2::<C64>::zeros((n_minus, n_plus));
    for i in 0..rank {
        sigma[[i, i]] = C64::new(0.5 + 0.5 * i as f64 + rng.gen_range(0.0..0.25), 0.0);
    }
    let d0 = left.dot(&sigma).dot(&linalg::adjoint(&right.view()));
    let d = GradedOperator::from_odd_block(space, d0.view())?;
    let generated = random_lipschitz(&d, strength, seed)?;
    let problem = IndexProblem::new(generated.h, d)?;
    let mut reports = BTreeMap::new();
    reports.insert("dH_norm".into(), generated.dh_norm);
    reports.insert("gap_bound".into(), problem.gap());
    let mut parameters = BTreeMap::new();
    parameters.insert("n_plus".into(), n_plus as f64);
    parameters.insert("n_minus".into(), n_minus as f64);
    parameters.insert("seed".into(), seed as f64);
    parameters.insert("strength".into(), strength);
    Ok(ModelDescriptor {
        name: "random".into(),
        parameters,
        payload: ModelPayload::Pairing {
            problem,
            bloch: None,
        },
        reports,
    })
}

/// `(−1, 2p − 1)` over `M_k` with `p` a random projection of a random rank on
/// an ambient `ℂ^n ⊗ ℂ^k`, `n ∈ {1, 2, 3}`.
pub fn mk_block_example(k: usize, seed: u64) -> Result<ModelDescriptor> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(1..=3);
    let rank = rng.gen_range(0..=n * k);
    mk_block_example_with(k, n, rank, seed)
}

/// As [`mk_block_example`] with the ambient size and rank fixed.
pub fn mk_block_example_with(
    k: usize,
    n: usize,
    rank: usize,
    seed: u64,
) -> Result<ModelDescriptor> {
    if k == 0 || n == 0 {
        return Err(Error::Parameter(format!(
            "need k >= 1 and n >= 1, got k = {k}, n = {n}"
        )));
    }
    let dim = n * k;
    if rank > dim {
        return Err(Error::Parameter(format!("rank {rank} exceeds n·k = {dim}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(0x6b));
    let u = linalg::random_unitary(&mut rng, dim)?;
    let frame = u.slice(s![.., ..rank]).to_owned();
    let p = frame.dot(&linalg::adjoint(&frame.view()));
    let variant = p.mapv(|z| z * 2.0) - linalg::identity(dim);
    let reference = -linalg::identity(dim);
    let class = RelativeClass::new(reference, variant, Coefficient::Matrix { k })?;
    let mut parameters = BTreeMap::new();
    parameters.insert("k".into(), k as f64);
    parameters.insert("n".into(), n as f64);
    parameters.insert("rank".into(), rank as f64);
    parameters.insert("seed".into(), seed as f64);
    Ok(ModelDescriptor {
        name: "mk".into(),
        parameters,
        payload: ModelPayload::Relative { class, rank },
        reports: BTreeMap::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::oscillator_dirac;

    #[test]
    fn unperturbed_blocks_commute_with_d() {
        let model = oscillator_dirac(20).unwrap();
        let d = model.problem().unwrap().d();
        let r = random_lipschitz(d, 0.0, 3).unwrap();
        assert!(r.dh_norm <= r.blocking_width);
        assert!(r.dh_norm < 1e-10, "{}", r.dh_norm);
    }

    #[test]
    fn output_is_even_and_gapped() {
        let model = oscillator_dirac(15).unwrap();
        let d = model.problem().unwrap().d();
        for seed in 0..5 {
            let r = random_lipschitz(d, 0.3, seed).unwrap();
            let h = &r.h;
            assert_eq!(h.grading_conjugate().matrix(), h.matrix());
            let spectrum = h.spectrum().unwrap();
            assert!(spectrum.min_abs() >= 0.1 * spectrum.spectral_radius());
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let a = random_instance(6, 4, 0.1, 9).unwrap();
        let b = random_instance(6, 4, 0.1, 9).unwrap();
        assert_eq!(
            a.problem().unwrap().h().matrix(),
            b.problem().unwrap().h().matrix()
        );
        assert_eq!(
            a.problem().unwrap().d().matrix(),
            b.problem().unwrap().d().matrix()
        );
    }

    #[test]
    fn mk_rank_bounds() {
        assert!(mk_block_example_with(2, 1, 3, 0).is_err());
        let m = mk_block_example_with(3, 1, 3, 0).unwrap();
        assert_eq!(m.relative_class().unwrap().1, 3);
    }
}
