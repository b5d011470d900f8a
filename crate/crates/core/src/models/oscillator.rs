use std::collections::BTreeMap;

use ndarray::Array2;

use super::{guard, ModelDescriptor, ModelPayload};
use crate::error::{Error, Result};
use crate::linalg::C64;
use crate::localizer::IndexProblem;
use crate::operator::{GradedOperator, GradedSpace, SpectralDecomposition};

/// Truncated oscillator on `GradedSpace(n, n − 1)`: `D₀ e_k = √k e_{k−1}`,
/// `H = 1`. The graded kernel index is `1` for every `n`.
pub fn oscillator_dirac(n: usize) -> Result<ModelDescriptor> {
    let d = oscillator_d(n)?;
    let h = GradedOperator::identity(d.space());
    build(n, d, h)
}

/// The oscillator `D` with a caller-supplied even `H`.
pub fn oscillator_with_h(n: usize, h: GradedOperator) -> Result<ModelDescriptor> {
    let d = oscillator_d(n)?;
    if h.space() != d.space() {
        return Err(Error::Contract(
            "H does not act on the oscillator space".into(),
        ));
    }
    build(n, d, h)
}

fn oscillator_d(n: usize) -> Result<GradedOperator> {
    if n < 2 {
        return Err(Error::Parameter(format!(
            "oscillator needs n >= 2, got {n}"
        )));
    }
    let space = GradedSpace::new(n, n - 1)?;
    let mut d0 = Array2::<C64>::zeros((n - 1, n));
    for k in 1..n {
        d0[[k - 1, k]] = C64::new((k as f64).sqrt(), 0.0);
    }
    let d = GradedOperator::from_odd_block(space, d0.view())?;
    // e_0 spans the kernel; each pair (even e_k, odd e_{k−1}) carries ±√k.
    let dim = space.dim();
    let mut values = Vec::with_capacity(dim);
    let mut vectors = Array2::<C64>::zeros((dim, dim));
    values.push(0.0);
    vectors[[0, 0]] = C64::new(1.0, 0.0);
    let h = std::f64::consts::FRAC_1_SQRT_2;
    for k in 1..n {
        let (even, odd) = (k, n + k - 1);
        for (sign, col) in [(1.0, 2 * k - 1), (-1.0, 2 * k)] {
            values.push(sign * (k as f64).sqrt());
            vectors[[even, col]] = C64::new(h, 0.0);
            vectors[[odd, col]] = C64::new(sign * h, 0.0);
        }
    }
    d.with_spectrum(SpectralDecomposition::from_unsorted(values, vectors), 1e-12)
}

fn build(n: usize, d: GradedOperator, h: GradedOperator) -> Result<ModelDescriptor> {
    // Midway between the two largest levels, so the top pair stays outside
    // the guard band |λ| ≤ 2ρ_max.
    let top = ((n - 1) as f64).sqrt();
    let below = ((n - 2) as f64).sqrt();
    let rho_max = (top + below) / 4.0;
    let boundary = [n - 1, 2 * n - 2];
    guard(&d, &boundary, rho_max)?;
    let problem = IndexProblem::new(h, d)?.with_rho_max(rho_max);
    let mut reports = BTreeMap::new();
    reports.insert("rho_max".into(), rho_max);
    reports.insert("gap_bound".into(), problem.gap());
    let mut parameters = BTreeMap::new();
    parameters.insert("n".into(), n as f64);
    Ok(ModelDescriptor {
        name: "oscillator".into(),
        parameters,
        payload: ModelPayload::Pairing {
            problem,
            bloch: None,
        },
        reports,
    })
}
