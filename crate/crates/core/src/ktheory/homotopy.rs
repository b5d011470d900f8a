//! Localizer index along sampled paths of `(H_t, D_t)` with a discrete
//! no-crossing certificate between consecutive samples.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::localizer_class;
use crate::error::{Error, Result};
use crate::linalg;
use crate::localizer::{
    assemble_localizer, constant_c, IndexProblem, LocalizerBundle, LocalizerParams,
};
use crate::localizing::LocalizingFunction;

/// How the common pair for a path is obtained.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CommonPair {
    /// From the worst constants along the path: smallest gap, largest
    /// `‖H‖` and `‖d(H)‖`.
    Auto {
        margin: f64,
    },
    Fixed {
        kappa: f64,
        rho: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HomotopyStep {
    pub step: usize,
    pub class: i64,
    pub min_gap: f64,
    /// `‖L_{t+1} − L_t‖`, absent on the last step.
    pub displacement: Option<f64>,
    /// `displacement < max(gap_t, gap_{t+1})`.
    pub no_crossing: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HomotopyReport {
    pub kappa: f64,
    pub rho: f64,
    pub steps: Vec<HomotopyStep>,
    pub constant_class: bool,
    pub certified: bool,
    /// First failing step and reason.
    pub failure: Option<String>,
}

impl HomotopyReport {
    pub fn stable(&self) -> bool {
        self.constant_class && self.certified
    }
}

fn common_pair(
    path: &[IndexProblem],
    phi: &LocalizingFunction,
    pair: CommonPair,
) -> Result<(f64, f64)> {
    match pair {
        CommonPair::Fixed { kappa, rho } => Ok((kappa, rho)),
        CommonPair::Auto { margin } => {
            let c_phi = phi.fourier()?.c_phi_upper();
            let mut g: f64 = f64::INFINITY;
            let mut h_norm: f64 = 0.0;
            let mut dh: f64 = 0.0;
            for p in path {
                g = g.min(p.gap());
                h_norm = h_norm.max(p.h_norm());
                dh = dh.max(p.dh_norm()?);
            }
            if dh == 0.0 {
                let params = crate::localizer::choose_params(&path[0], phi, margin)?;
                return Ok((params.kappa, params.rho));
            }
            let kappa = g * g / (2.0 * dh);
            let rho = margin * (2.0 * g / kappa).max(c_phi * h_norm * dh / (g * g - kappa * dh));
            Ok((kappa, rho))
        }
    }
}

/// Localizer class at every sample with one admissible `(κ, ρ)` for the whole
/// path. Samples are evaluated in parallel; the no-crossing certificate
/// `‖L_{t+1} − L_t‖ < max(gap_t, gap_{t+1})` (Weyl) is then checked in order.
pub fn homotopy_stability(
    path: &[IndexProblem],
    phi: &LocalizingFunction,
    pair: CommonPair,
) -> Result<HomotopyReport> {
    if path.is_empty() {
        return Err(Error::Contract("empty path".into()));
    }
    let (kappa, rho) = common_pair(path, phi, pair)?;
    let rho_max = path
        .iter()
        .filter_map(|p| p.rho_max())
        .fold(f64::INFINITY, f64::min);
    if rho > rho_max {
        return Err(Error::NoCommonPair(format!(
            "rho = {rho} exceeds the truncation limit {rho_max}"
        )));
    }
    let params: Vec<LocalizerParams> = path
        .iter()
        .map(|p| constant_c(kappa, rho, p, phi))
        .collect::<Result<_>>()?;
    if let Some((i, p)) = params.iter().enumerate().find(|(_, p)| !p.admissible) {
        return Err(Error::NoCommonPair(format!(
            "(kappa={kappa}, rho={rho}) is not admissible at step {i}: {}",
            p.violation().unwrap_or_default()
        )));
    }
    let bundles: Vec<LocalizerBundle> = path
        .par_iter()
        .zip(params.par_iter())
        .map(|(p, params)| assemble_localizer(p, phi, params))
        .collect::<Result<_>>()?;

    let mut steps = Vec::with_capacity(bundles.len());
    let mut failure = None;
    for (i, b) in bundles.iter().enumerate() {
        let class = localizer_class(b)?;
        let (displacement, no_crossing) = match bundles.get(i + 1) {
            Some(next) => {
                let delta = displacement(b, next)?;
                let ok = delta < b.min_abs_eigenvalue.max(next.min_abs_eigenvalue);
                (Some(delta), Some(ok))
            }
            None => (None, None),
        };
        if failure.is_none() {
            if no_crossing == Some(false) {
                failure = Some(format!(
                    "step {i} -> {}: displacement {:.3e} exceeds both gaps",
                    i + 1,
                    displacement.unwrap_or(f64::NAN)
                ));
            } else if i > 0
                && class
                    != steps
                        .first()
                        .map(|s: &HomotopyStep| s.class)
                        .unwrap_or(class)
            {
                failure = Some(format!("class changes at step {i}"));
            }
        }
        steps.push(HomotopyStep {
            step: i,
            class,
            min_gap: b.min_abs_eigenvalue,
            displacement,
            no_crossing,
        });
    }
    let constant_class = steps.iter().all(|s| s.class == steps[0].class);
    let certified = steps.iter().all(|s| s.no_crossing != Some(false));
    Ok(HomotopyReport {
        kappa,
        rho,
        steps,
        constant_class,
        certified,
        failure,
    })
}

/// `‖L_b − L_a‖`: in the shared window frame when both bundles use the same
/// window basis, densely otherwise.
fn displacement(a: &LocalizerBundle, b: &LocalizerBundle) -> Result<f64> {
    let (wa, wb) = (a.window(), b.window());
    if wa.basis.dim() == wb.basis.dim() && wa.basis == wb.basis {
        let diff = b.reduced_matrix() - a.reduced_matrix();
        return linalg::spectral_norm(&diff.view());
    }
    let la = a.full_matrix()?;
    let lb = b.full_matrix()?;
    let diff = lb.matrix() - la.matrix();
    Ok(linalg::eigvalsh(&diff.view())?
        .iter()
        .fold(0.0_f64, |m, v| m.max(v.abs())))
}
