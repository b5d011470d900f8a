//! Signatures, half-signature classes and the localizer index.

pub mod homotopy;
pub mod ldl;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, C64};
use crate::localizer::{
    assemble_localizer, choose_params, constant_c, grade_rows, IndexProblem, LocalizerBundle,
    LocalizerParams, SpectralWindow, DEFAULT_MARGIN,
};
use crate::localizing::LocalizingFunction;
use crate::operator::{func_calc, operator_norm, GradedOperator, Parity};

pub use homotopy::{homotopy_stability, CommonPair, HomotopyReport, HomotopyStep};
pub use ldl::ldl_inertia;

/// Signature threshold relative to `‖T‖`.
pub const TAU_SIG: f64 = 1e-8;

/// Eigenvalue counts above `τ`, below `−τ` and in between.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Inertia {
    pub n_pos: usize,
    pub n_neg: usize,
    pub n_zero: usize,
}

impl Inertia {
    pub fn count(values: impl IntoIterator<Item = f64>, tau: f64) -> Self {
        let mut out = Self::default();
        for v in values {
            if v > tau {
                out.n_pos += 1;
            } else if v < -tau {
                out.n_neg += 1;
            } else {
                out.n_zero += 1;
            }
        }
        out
    }

    pub fn signature(&self) -> i64 {
        self.n_pos as i64 - self.n_neg as i64
    }

    pub fn dim(&self) -> usize {
        self.n_pos + self.n_neg + self.n_zero
    }

    pub fn is_invertible(&self) -> bool {
        self.n_zero == 0
    }
}

/// Inertia of a hermitian operator at `τ = tau_rel·‖T‖`.
pub fn signature(t: &GradedOperator, tau_rel: f64) -> Result<Inertia> {
    if !t.is_hermitian() {
        return Err(Error::Contract(
            "signature needs a hermitian operator".into(),
        ));
    }
    let spectrum = t.spectrum()?;
    let tau = tau_rel * spectrum.spectral_radius();
    Ok(Inertia::count(spectrum.eigenvalues().iter().copied(), tau))
}

/// Inertia of a dense hermitian matrix from its eigenvalues.
pub fn matrix_signature(m: &ArrayView2<C64>, tau_rel: f64) -> Result<Inertia> {
    let w = linalg::eigvalsh(m)?;
    let norm = w.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    Ok(Inertia::count(w.iter().copied(), tau_rel * norm))
}

/// `½(sign G − sign H)` from the two inertias.
pub fn half_signature(reference: &Inertia, variant: &Inertia) -> Result<i64> {
    for (leg, inertia) in [("reference", reference), ("variant", variant)] {
        if !inertia.is_invertible() {
            return Err(Error::Precondition(format!(
                "{leg} leg has {} eigenvalues inside the signature band",
                inertia.n_zero
            )));
        }
    }
    if reference.dim() != variant.dim() {
        return Err(Error::Contract("legs have different dimensions".into()));
    }
    let difference = variant.signature() - reference.signature();
    if difference % 2 != 0 {
        return Err(Error::ClassInconsistency { difference });
    }
    Ok(difference / 2)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "algebra", rename_all = "lowercase")]
pub enum Coefficient {
    Complex,
    /// `M_k(ℂ)`: matrices are `n × n` blocks of `k × k` entries.
    Matrix {
        k: usize,
    },
}

/// A pair of hermitian invertibles `(H_ref, H_var)` defining a relative class.
#[derive(Clone, Debug)]
pub struct RelativeClass {
    pub reference: Array2<C64>,
    pub variant: Array2<C64>,
    pub coefficient: Coefficient,
}

impl RelativeClass {
    pub fn new(
        reference: Array2<C64>,
        variant: Array2<C64>,
        coefficient: Coefficient,
    ) -> Result<Self> {
        if reference.dim() != variant.dim() || reference.nrows() != reference.ncols() {
            return Err(Error::Contract("legs must be square of equal size".into()));
        }
        if let Coefficient::Matrix { k } = coefficient {
            if k == 0 || reference.nrows() % k != 0 {
                return Err(Error::Contract(format!(
                    "dimension {} is not a multiple of the block size {k}",
                    reference.nrows()
                )));
            }
        }
        Ok(Self {
            reference: linalg::hermitian_part(&reference.view()),
            variant: linalg::hermitian_part(&variant.view()),
            coefficient,
        })
    }
}

/// `½(sign(H_var) − sign(H_ref))`. Over `M_k` the subdivisions are forgotten
/// and the same count is taken on the underlying complex matrices.
pub fn half_signature_class(class: &RelativeClass, tau_rel: f64) -> Result<i64> {
    let reference = matrix_signature(&class.reference.view(), tau_rel)?;
    let variant = matrix_signature(&class.variant.view(), tau_rel)?;
    half_signature(&reference, &variant)
}

/// `TR(G₊) − TR(H₊)` with `TR` the unnormalized trace, computed from the
/// positive spectral projections.
pub fn trace_class(class: &RelativeClass) -> Result<i64> {
    let rank = |m: &Array2<C64>| -> Result<f64> {
        let (w, v) = linalg::eigh(&m.view())?;
        let positive: Vec<f64> = w.iter().map(|&x| if x > 0.0 { 1.0 } else { 0.0 }).collect();
        let p = linalg::reassemble(&v.view(), &positive);
        Ok(p.diag().iter().map(|z| z.re).sum())
    };
    let difference = rank(&class.variant)? - rank(&class.reference)?;
    let rounded = difference.round();
    if (difference - rounded).abs() > 1e-8 {
        return Err(Error::InternalConsistency(format!(
            "trace difference {difference} is not an integer"
        )));
    }
    Ok(rounded as i64)
}

/// `H₊ = (1 + H|H|⁻¹)/2`, taken as `(1 + H)/2` when `H² = 1`.
pub fn positive_projection(h: &GradedOperator) -> Result<GradedOperator> {
    crate::localizer::gap(h)?;
    let involution = h
        .spectrum()?
        .eigenvalues()
        .iter()
        .all(|l| (l.abs() - 1.0).abs() <= INVOLUTION_TOLERANCE);
    if involution {
        return GradedOperator::identity(h.space())
            .add(h)?
            .scale(0.5)
            .into_hermitian();
    }
    func_calc(|x| if x > 0.0 { 1.0 } else { 0.0 }, h)
}

const INVOLUTION_TOLERANCE: f64 = 1e-12;

/// Allowed excess of `‖F‖` over 1.
pub const CONTRACTION_TOLERANCE: f64 = 1e-10;

fn contraction_root(f: &GradedOperator) -> Result<GradedOperator> {
    if f.parity() != Parity::Odd || !f.is_hermitian() {
        return Err(Error::Contract("F must be odd and hermitian".into()));
    }
    let norm = operator_norm(f)?;
    if norm > 1.0 + CONTRACTION_TOLERANCE {
        return Err(Error::ContractionViolation {
            norm,
            tolerance: CONTRACTION_TOLERANCE,
        });
    }
    func_calc(|x| (1.0 - x * x).max(0.0).sqrt(), f)
}

/// `Q_F = γ(1 − F²) + F√(1 − F²) + γ₋` for an odd hermitian contraction `F`.
pub fn index_class_projection(f: &GradedOperator) -> Result<GradedOperator> {
    let root = contraction_root(f)?;
    let space = f.space();
    let f2 = f.compose(f)?;
    let one_minus = GradedOperator::identity(space).sub(&f2)?;
    let gamma = GradedOperator::grading(space);
    let gamma_minus = GradedOperator::identity(space).sub(&gamma)?.scale(0.5);
    gamma
        .compose(&one_minus)?
        .add(&f.compose(&root)?)?
        .add(&gamma_minus)?
        .into_hermitian()
}

/// `U_F = F + γ√(1 − F²)`.
pub fn index_class_unitary(f: &GradedOperator) -> Result<GradedOperator> {
    let root = contraction_root(f)?;
    let gamma = GradedOperator::grading(f.space());
    f.add(&gamma.compose(&root)?)
}

/// How the localizer pair `(κ, ρ)` is obtained.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamSelection {
    Auto { margin: f64 },
    Fixed { kappa: f64, rho: f64 },
}

impl Default for ParamSelection {
    fn default() -> Self {
        ParamSelection::Auto {
            margin: DEFAULT_MARGIN,
        }
    }
}

/// Machine-readable class report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub method: String,
    pub signature_ref: i64,
    pub signature_var: i64,
    pub class: i64,
    pub admissible: bool,
    pub kappa: f64,
    pub rho: f64,
    pub c_phi: f64,
    #[serde(rename = "C_kr")]
    pub c_kr: f64,
    pub min_gap: f64,
}

/// A localizer half-signature with its certificate.
#[derive(Clone, Debug)]
pub struct LocalizerIndex {
    pub value: i64,
    pub params: LocalizerParams,
    pub bundle: LocalizerBundle,
    pub report: ClassReport,
}

fn resolve_params(
    problem: &IndexProblem,
    phi: &LocalizingFunction,
    selection: ParamSelection,
) -> Result<LocalizerParams> {
    match selection {
        ParamSelection::Auto { margin } => choose_params(problem, phi, margin),
        ParamSelection::Fixed { kappa, rho } => constant_c(kappa, rho, problem, phi),
    }
}

fn evaluate(
    problem: &IndexProblem,
    phi: &LocalizingFunction,
    params: LocalizerParams,
    method: &str,
) -> Result<LocalizerIndex> {
    let bundle = assemble_localizer(problem, phi, &params)?;
    let variant = bundle.inertia(TAU_SIG);
    if !variant.is_invertible() {
        return Err(Error::NotInvertible {
            eigenvalue: bundle.min_abs_eigenvalue,
            threshold: TAU_SIG * bundle.norm,
        });
    }
    let space = problem.space();
    let reference = Inertia {
        n_pos: space.n_minus(),
        n_neg: space.n_plus(),
        n_zero: 0,
    };
    let value = half_signature(&reference, &variant)?;
    let report = ClassReport {
        method: method.to_string(),
        signature_ref: reference.signature(),
        signature_var: variant.signature(),
        class: value,
        admissible: params.admissible,
        kappa: params.kappa,
        rho: params.rho,
        c_phi: params.c_phi,
        c_kr: params.c_kr,
        min_gap: bundle.min_abs_eigenvalue,
    };
    Ok(LocalizerIndex {
        value,
        params,
        bundle,
        report,
    })
}

/// Class of `(−γ, L_{κ,ρ}(H, D, φ))`, i.e. `½ sign(L) + ½ sign(γ)`, for an
/// admissible pair.
pub fn localizer_index(
    problem: &IndexProblem,
    phi: &LocalizingFunction,
    selection: ParamSelection,
) -> Result<LocalizerIndex> {
    let params = resolve_params(problem, phi, selection)?;
    problem.require_resolved(params.rho)?;
    params.require_admissible()?;
    evaluate(problem, phi, params, "localizer")
}

/// The same half-signature at a fixed pair without requiring admissibility.
/// Only the numerically observed gap of `L` backs the integer; the report
/// carries `admissible` as computed (normally `false`).
pub fn uncertified_localizer_index(
    problem: &IndexProblem,
    phi: &LocalizingFunction,
    kappa: f64,
    rho: f64,
) -> Result<LocalizerIndex> {
    problem.require_resolved(rho)?;
    let params = constant_c(kappa, rho, problem, phi)?;
    evaluate(problem, phi, params, "localizer_uncertified")
}

/// `½ sign(P(κD + γH)P) + ½ sign(γP)` with `P = 1_{(−ρ,ρ)}(D)`; inertia of
/// the compression from a Bunch–Kaufman factorization.
pub fn sharp_formula_index(problem: &IndexProblem, kappa: f64, rho: f64) -> Result<i64> {
    let window = SpectralWindow::new(problem.d(), rho, true)?;
    let v = &window.basis;
    let space = problem.space();
    let dv = problem.d().apply(&v.view())?;
    let hv = problem.h().apply(&v.view())?;
    let gamma_v = grade_rows(&space, v);
    let v_adj = linalg::adjoint(&v.view());
    let m = v_adj.dot(&dv).mapv(|z| z * kappa) + linalg::adjoint(&gamma_v.view()).dot(&hv);
    let m = linalg::hermitian_part(&m.view());
    let norm = linalg::spectral_norm(&m.view())?;
    let inertia = ldl_inertia(&m.view(), TAU_SIG * norm);
    if !inertia.is_invertible() {
        return Err(Error::NotInvertible {
            eigenvalue: 0.0,
            threshold: TAU_SIG * norm,
        });
    }
    let total = inertia.signature() + window.grading_trace;
    if total % 2 != 0 {
        return Err(Error::ClassInconsistency { difference: total });
    }
    Ok(total / 2)
}

/// Half-signature class of the full dense localizer against `−γ`.
pub fn localizer_class(bundle: &LocalizerBundle) -> Result<i64> {
    let space = bundle.space();
    let reference = Inertia {
        n_pos: space.n_minus(),
        n_neg: space.n_plus(),
        n_zero: 0,
    };
    half_signature(&reference, &bundle.inertia(TAU_SIG))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::real_diag;
    use crate::operator::GradedSpace;

    #[test]
    fn small_signatures() {
        let space = GradedSpace::new(2, 1).unwrap();
        let t =
            GradedOperator::hermitian(space, real_diag(&[1.0, 1.0, -1.0]), Parity::Even).unwrap();
        assert_eq!(signature(&t, TAU_SIG).unwrap().signature(), 1);
        let g = GradedOperator::grading(GradedSpace::new(3, 3).unwrap());
        assert_eq!(signature(&g, TAU_SIG).unwrap().signature(), 0);
        let flat = GradedOperator::hermitian(
            GradedSpace::new(1, 1).unwrap(),
            real_diag(&[5.0, 1e-14]),
            Parity::Even,
        )
        .unwrap();
        let inertia = signature(&flat, 1e-10 / 5.0).unwrap();
        assert_eq!(inertia.n_zero, 1);
        assert!(!inertia.is_invertible());
    }

    #[test]
    fn half_signature_examples() {
        let c = RelativeClass::new(
            real_diag(&[1.0, -1.0]),
            real_diag(&[1.0, 1.0]),
            Coefficient::Complex,
        )
        .unwrap();
        assert_eq!(half_signature_class(&c, TAU_SIG).unwrap(), 1);
        assert_eq!(trace_class(&c).unwrap(), 1);
        let same = RelativeClass::new(
            real_diag(&[2.0, -1.0]),
            real_diag(&[2.0, -1.0]),
            Coefficient::Complex,
        )
        .unwrap();
        assert_eq!(half_signature_class(&same, TAU_SIG).unwrap(), 0);
    }

    #[test]
    fn odd_difference_is_inconsistent() {
        let a = Inertia {
            n_pos: 2,
            n_neg: 1,
            n_zero: 0,
        };
        let b = Inertia {
            n_pos: 3,
            n_neg: 0,
            n_zero: 0,
        };
        assert_eq!(half_signature(&a, &b).unwrap(), 1);
        let c = Inertia {
            n_pos: 2,
            n_neg: 0,
            n_zero: 1,
        };
        assert!(matches!(
            half_signature(&a, &c),
            Err(Error::Precondition(_))
        ));
        assert!(matches!(
            half_signature(
                &Inertia {
                    n_pos: 2,
                    n_neg: 1,
                    n_zero: 0
                },
                &Inertia {
                    n_pos: 2,
                    n_neg: 2,
                    n_zero: 0
                }
            ),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn positive_projection_of_diagonal() {
        let space = GradedSpace::new(1, 1).unwrap();
        let h = GradedOperator::hermitian(space, real_diag(&[2.0, -3.0]), Parity::Even).unwrap();
        let p = positive_projection(&h).unwrap();
        assert_eq!(p.matrix(), &real_diag(&[1.0, 0.0]));
    }

    #[test]
    fn projection_of_zero_and_unitary_contractions() {
        let space = GradedSpace::new(2, 2).unwrap();
        let zero = GradedOperator::zeros(space, Parity::Odd);
        let q = index_class_projection(&zero).unwrap();
        assert_eq!(q.matrix(), &real_diag(&[1.0, 1.0, 0.0, 0.0]));
        let swap = GradedOperator::from_odd_block(space, linalg::identity(2).view()).unwrap();
        let q = index_class_projection(&swap).unwrap();
        let diff = q.matrix() - &real_diag(&[0.0, 0.0, 1.0, 1.0]);
        assert!(linalg::frobenius(&diff.view()) < 1e-14);
        let too_big = swap.scale(1.5);
        assert!(matches!(
            index_class_projection(&too_big),
            Err(Error::ContractionViolation { .. })
        ));
    }
}
