//! The spectral localizer
//! `L = Φ_ρ γ H Φ_ρ + κ Φ_{2ρ} D Φ_{2ρ} − (1 − Φ_{2ρ}⁴)^{1/2} γ`,
//! `Φ_ρ = φ(D/ρ)`, its admissibility constants and the sharp-projection variant.
//!
//! All cutoffs are functions of `D`, so `L` leaves the span `V` of the
//! `D`-eigenvectors inside the support window invariant and equals `−γ` on
//! the orthogonal complement (which `γ` preserves because `D` is odd). The
//! localizer is therefore stored as its compression to `V` plus the exact
//! complement contribution; dense `n × n` assembly is available on demand.

use std::sync::OnceLock;

use ndarray::{Array1, Array2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ktheory::Inertia;
use crate::linalg::{self, C64};
use crate::localizing::LocalizingFunction;
use crate::operator::{operator_norm, GradedOperator, GradedSpace, Parity};

/// Invertibility threshold relative to the operator norm.
pub const EPS_INV: f64 = 1e-10;
/// Distance of `D`-eigenvalues from the sharp cut `±ρ`, relative to `‖D‖`.
pub const EPS_EDGE: f64 = 1e-8;
pub const DEFAULT_MARGIN: f64 = 1.1;
/// Allowed `‖γV − V(V*γV)‖_F/√r` for a spectral window basis `V`.
const INVARIANCE_TOLERANCE: f64 = 1e-8;
/// Eigenvalues of `D` this close (relative to `max(1, ‖D‖)`) to a smooth
/// window edge are kept together.
const CLUSTER_TOLERANCE: f64 = 1e-9;

/// `g = ‖H⁻¹‖⁻¹ = min |λ(H)|`, refusing numerically singular `H`.
pub fn gap(h: &GradedOperator) -> Result<f64> {
    let spectrum = h.spectrum()?;
    let threshold = EPS_INV * spectrum.spectral_radius();
    let closest = spectrum
        .eigenvalues()
        .iter()
        .copied()
        .min_by(|a, b| a.abs().total_cmp(&b.abs()))
        .ok_or_else(|| Error::Contract("empty operator".into()))?;
    if closest.abs() <= threshold {
        return Err(Error::NotInvertible {
            eigenvalue: closest,
            threshold,
        });
    }
    Ok(closest.abs())
}

/// An even invertible `H` and an odd `D` on the same space, with the norms
/// entering the admissibility constants.
#[derive(Debug)]
pub struct IndexProblem {
    h: GradedOperator,
    d: GradedOperator,
    gap: f64,
    h_norm: f64,
    d_norm: f64,
    rho_max: Option<f64>,
    dh_norm: OnceLock<Result<f64>>,
}

impl Clone for IndexProblem {
    fn clone(&self) -> Self {
        let dh_norm = OnceLock::new();
        if let Some(v) = self.dh_norm.get() {
            let _ = dh_norm.set(v.clone());
        }
        Self {
            h: self.h.clone(),
            d: self.d.clone(),
            gap: self.gap,
            h_norm: self.h_norm,
            d_norm: self.d_norm,
            rho_max: self.rho_max,
            dh_norm,
        }
    }
}

impl IndexProblem {
    pub fn new(h: GradedOperator, d: GradedOperator) -> Result<Self> {
        if h.space() != d.space() {
            return Err(Error::Contract("H and D act on different spaces".into()));
        }
        if !h.is_hermitian() || h.parity() != Parity::Even {
            return Err(Error::Contract("H must be even and hermitian".into()));
        }
        if !d.is_hermitian() || d.parity() != Parity::Odd {
            return Err(Error::Contract("D must be odd and hermitian".into()));
        }
        let gap = gap(&h)?;
        let h_norm = h.spectrum()?.spectral_radius();
        let d_norm = d.spectrum()?.spectral_radius();
        Ok(Self {
            h,
            d,
            gap,
            h_norm,
            d_norm,
            rho_max: None,
            dh_norm: OnceLock::new(),
        })
    }

    /// Largest `ρ` the truncation resolves faithfully.
    pub fn with_rho_max(mut self, rho_max: f64) -> Self {
        self.rho_max = Some(rho_max);
        self
    }

    pub fn h(&self) -> &GradedOperator {
        &self.h
    }

    pub fn d(&self) -> &GradedOperator {
        &self.d
    }

    pub fn space(&self) -> GradedSpace {
        self.h.space()
    }

    pub fn gap(&self) -> f64 {
        self.gap
    }

    pub fn h_norm(&self) -> f64 {
        self.h_norm
    }

    pub fn d_norm(&self) -> f64 {
        self.d_norm
    }

    pub fn rho_max(&self) -> Option<f64> {
        self.rho_max
    }

    /// Whether the truncation resolves the window at `rho`.
    pub fn resolves(&self, rho: f64) -> bool {
        self.rho_max.map_or(true, |m| rho <= m)
    }

    pub fn require_resolved(&self, rho: f64) -> Result<()> {
        match self.rho_max {
            Some(m) if rho > m => Err(Error::Parameter(format!(
                "rho = {rho} exceeds the truncation limit rho_max = {m}"
            ))),
            _ => Ok(()),
        }
    }

    /// `‖d(H)‖ = ‖D₀H₊ − H₋D₀‖` (the commutator is odd and anti-hermitian).
    pub fn dh_norm(&self) -> Result<f64> {
        self.dh_norm
            .get_or_init(|| {
                let d0 = self.d.block_minus_plus();
                let block = linalg::dot_left_sparse(&d0, &self.h.block_plus_plus())
                    - linalg::dot_right_sparse(&self.h.block_minus_minus(), &d0);
                linalg::spectral_norm(&block.view())
            })
            .clone()
    }

    /// Same problem with `H` replaced (norms recomputed).
    pub fn with_h(&self, h: GradedOperator) -> Result<Self> {
        let mut out = Self::new(h, self.d.clone())?;
        out.rho_max = self.rho_max;
        Ok(out)
    }

    /// Same problem with `D` replaced (norms recomputed).
    pub fn with_d(&self, d: GradedOperator) -> Result<Self> {
        let mut out = Self::new(self.h.clone(), d)?;
        out.rho_max = self.rho_max;
        Ok(out)
    }
}

/// `(κ, ρ, g, ‖d(H)‖, C_{κ,ρ})` with the admissibility verdict
/// `C_{κ,ρ} < min(g², κ²ρ²/4)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalizerParams {
    pub kappa: f64,
    pub rho: f64,
    pub gap: f64,
    pub h_norm: f64,
    #[serde(rename = "dH_norm")]
    pub dh_norm: f64,
    pub c_phi: f64,
    #[serde(rename = "C_kr")]
    pub c_kr: f64,
    pub admissible: bool,
}

impl LocalizerParams {
    /// `C_{κ,ρ} = (κ + c_φ‖H‖/ρ)·‖d(H)‖` and the verdict, from raw constants.
    pub fn from_constants(
        kappa: f64,
        rho: f64,
        gap: f64,
        h_norm: f64,
        dh_norm: f64,
        c_phi: f64,
    ) -> Result<Self> {
        if !(kappa > 0.0 && kappa.is_finite() && rho > 0.0 && rho.is_finite()) {
            return Err(Error::Parameter(format!(
                "kappa and rho must be positive and finite, got ({kappa}, {rho})"
            )));
        }
        let c_kr = (kappa + c_phi * h_norm / rho) * dh_norm;
        let admissible = c_kr < (gap * gap).min(kappa * kappa * rho * rho / 4.0);
        Ok(Self {
            kappa,
            rho,
            gap,
            h_norm,
            dh_norm,
            c_phi,
            c_kr,
            admissible,
        })
    }

    /// `min(1, g² − C, κ²ρ²/4 − C)`, a lower bound for `min |λ(L)|²` on
    /// admissible pairs.
    pub fn certified_gap_squared(&self) -> f64 {
        1f64.min(self.gap * self.gap - self.c_kr)
            .min(self.kappa * self.kappa * self.rho * self.rho / 4.0 - self.c_kr)
    }

    /// The violated admissibility inequality, if any.
    pub fn violation(&self) -> Option<String> {
        let g2 = self.gap * self.gap;
        let kr = self.kappa * self.kappa * self.rho * self.rho / 4.0;
        let mut parts = Vec::new();
        if self.c_kr >= g2 {
            parts.push(format!("C_kr = {:.6e} >= g^2 = {:.6e}", self.c_kr, g2));
        }
        if self.c_kr >= kr {
            parts.push(format!(
                "C_kr = {:.6e} >= kappa^2 rho^2/4 = {:.6e}",
                self.c_kr, kr
            ));
        }
        (!parts.is_empty()).then(|| parts.join("; "))
    }

    pub fn require_admissible(&self) -> Result<()> {
        match self.violation() {
            None => Ok(()),
            Some(violated) => Err(Error::NotAdmissible {
                kappa: self.kappa,
                rho: self.rho,
                violated,
            }),
        }
    }
}

/// Admissibility constants for a given pair. The tail-inclusive upper bound
/// on `c_φ` is used so that the verdict is a certificate.
pub fn constant_c(
    kappa: f64,
    rho: f64,
    problem: &IndexProblem,
    phi: &LocalizingFunction,
) -> Result<LocalizerParams> {
    let c_phi = phi.fourier()?.c_phi_upper();
    LocalizerParams::from_constants(
        kappa,
        rho,
        problem.gap(),
        problem.h_norm(),
        problem.dh_norm()?,
        c_phi,
    )
}

/// `κ = g²/(2‖d(H)‖)` and
/// `ρ = margin · max(2g/κ, c_φ‖H‖‖d(H)‖/(g² − κ‖d(H)‖))`, which is admissible.
pub fn choose_params(
    problem: &IndexProblem,
    phi: &LocalizingFunction,
    margin: f64,
) -> Result<LocalizerParams> {
    if !(margin > 1.0 && margin.is_finite()) {
        return Err(Error::Parameter(format!(
            "margin must exceed 1, got {margin}"
        )));
    }
    let dh = problem.dh_norm()?;
    let g = problem.gap();
    let c_phi = phi.fourier()?.c_phi_upper();
    let (kappa, rho) = if dh == 0.0 {
        commuting_pair(problem, phi)?
    } else {
        let kappa = g * g / (2.0 * dh);
        let rho_min = (2.0 * g / kappa).max(c_phi * problem.h_norm() * dh / (g * g - kappa * dh));
        let rho = margin * rho_min;
        if let Some(rho_max) = problem.rho_max() {
            if rho > rho_max {
                return Err(Error::TruncationTooSmall { rho_min, rho_max });
            }
        }
        (kappa, rho)
    };
    let params = LocalizerParams::from_constants(kappa, rho, g, problem.h_norm(), dh, c_phi)?;
    if !params.admissible {
        return Err(Error::InternalConsistency(format!(
            "selected pair fails admissibility: {}",
            params.violation().unwrap_or_default()
        )));
    }
    Ok(params)
}

/// `κ = 1`, `ρ = max(1, ‖D‖)/2`, enlarged until `Φ_ρ ≠ 0` and clipped to the
/// truncation.
fn commuting_pair(problem: &IndexProblem, phi: &LocalizingFunction) -> Result<(f64, f64)> {
    let lowest = problem.d().spectrum()?.min_abs();
    let needed = 2.0 * lowest;
    let mut rho = (problem.d_norm().max(1.0) / 2.0).max(needed);
    if let Some(rho_max) = problem.rho_max() {
        rho = rho.min(rho_max);
    }
    if phi.eval(lowest / rho) == 0.0 {
        return Err(Error::TruncationTooSmall {
            rho_min: needed,
            rho_max: rho,
        });
    }
    Ok((1.0, rho))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LocalizerKind {
    Smooth,
    Sharp,
}

/// Orthonormal eigenvectors of `D` inside a symmetric spectral window, with
/// the compression `G = V*γV` of the grading.
#[derive(Clone, Debug)]
pub struct SpectralWindow {
    pub basis: Array2<C64>,
    pub eigenvalues: Vec<f64>,
    pub grading: Array2<C64>,
    /// `tr(V*γV)`, an integer because the window is `γ`-invariant.
    pub grading_trace: i64,
}

impl SpectralWindow {
    /// Eigenvectors with `|λ| < radius`. With `sharp`, eigenvalues within
    /// `EPS_EDGE·‖D‖` of the edge are an error; otherwise the edge is moved
    /// outwards past any cluster touching it.
    pub fn new(d: &GradedOperator, radius: f64, sharp: bool) -> Result<Self> {
        let spectrum = d.spectrum()?;
        let norm = spectrum.spectral_radius();
        let mut cut = radius;
        if sharp {
            let tolerance = EPS_EDGE * norm;
            if let Some(&lam) = spectrum
                .eigenvalues()
                .iter()
                .find(|l| (l.abs() - radius).abs() <= tolerance)
            {
                return Err(Error::SpectralCut {
                    eigenvalue: lam,
                    cut: radius,
                    tolerance,
                });
            }
        } else {
            let tolerance = CLUSTER_TOLERANCE * norm.max(1.0);
            while let Some(edge) = spectrum
                .eigenvalues()
                .iter()
                .map(|l| l.abs())
                .filter(|a| (a - cut).abs() <= tolerance)
                .reduce(f64::max)
            {
                cut = edge + 2.0 * tolerance;
            }
        }
        let indices = spectrum.select(|l| l.abs() < cut);
        let basis = spectrum.eigenvectors().select(Axis(1), &indices);
        let eigenvalues: Vec<f64> = indices.iter().map(|&i| spectrum.eigenvalues()[i]).collect();
        let space = d.space();
        let gamma_basis = grade_rows(&space, &basis);
        let grading = linalg::adjoint(&basis.view()).dot(&gamma_basis);
        let trace: f64 = grading.diag().iter().map(|z| z.re).sum();
        let grading_trace = trace.round() as i64;
        let r = indices.len();
        let leak = linalg::frobenius(&(gamma_basis - basis.dot(&grading)).view());
        if (trace - grading_trace as f64).abs() > 1e-6
            || leak > INVARIANCE_TOLERANCE * (r.max(1) as f64).sqrt()
        {
            return Err(Error::InternalConsistency(format!(
                "spectral window |λ| < {cut} is not grading-invariant (leak {leak:e}, trace {trace})"
            )));
        }
        Ok(Self {
            basis,
            eigenvalues,
            grading,
            grading_trace,
        })
    }

    pub fn rank(&self) -> usize {
        self.eigenvalues.len()
    }
}

/// `γ·M` by row signs.
pub(crate) fn grade_rows(space: &GradedSpace, m: &Array2<C64>) -> Array2<C64> {
    let mut out = m.clone();
    for (i, mut row) in out.axis_iter_mut(Axis(0)).enumerate() {
        if i >= space.n_plus() {
            row.mapv_inplace(|z| -z);
        }
    }
    out
}

fn scale_rows(values: &[f64], m: &Array2<C64>) -> Array2<C64> {
    let mut out = m.clone();
    for (mut row, &v) in out.axis_iter_mut(Axis(0)).zip(values) {
        row.mapv_inplace(|z| z * v);
    }
    out
}

fn scale_cols(m: &Array2<C64>, values: &[f64]) -> Array2<C64> {
    let mut out = m.clone();
    for (mut col, &v) in out.axis_iter_mut(Axis(1)).zip(values) {
        col.mapv_inplace(|z| z * v);
    }
    out
}

fn add_diag(m: &mut Array2<C64>, values: &[f64]) {
    for (i, &v) in values.iter().enumerate() {
        m[[i, i]] += v;
    }
}

/// An assembled localizer: compression to the spectral window plus the exact
/// `−γ` complement.
#[derive(Clone, Debug)]
pub struct LocalizerBundle {
    pub kind: LocalizerKind,
    pub params: LocalizerParams,
    space: GradedSpace,
    window: SpectralWindow,
    /// `φ(λ/ρ)` on the window (indicator values for the sharp variant).
    phi_rho: Vec<f64>,
    /// `φ(λ/2ρ)` on the window.
    phi_2rho: Vec<f64>,
    reduced: Array2<C64>,
    reduced_eigenvalues: Array1<f64>,
    /// Largest `|λ(L)|`.
    pub norm: f64,
    /// Certified spectral gap `min |λ(L)|`.
    pub min_abs_eigenvalue: f64,
}

impl LocalizerBundle {
    pub fn space(&self) -> GradedSpace {
        self.space
    }

    pub fn window(&self) -> &SpectralWindow {
        &self.window
    }

    pub fn reduced_matrix(&self) -> &Array2<C64> {
        &self.reduced
    }

    pub fn reduced_eigenvalues(&self) -> &Array1<f64> {
        &self.reduced_eigenvalues
    }

    fn complement_dim(&self) -> usize {
        self.space.dim() - self.window.rank()
    }

    /// Eigenvalue counts of the full localizer at threshold `tau_rel·‖L‖`.
    pub fn inertia(&self, tau_rel: f64) -> Inertia {
        let tau = tau_rel * self.norm;
        let mut inertia = Inertia::count(self.reduced_eigenvalues.iter().copied(), tau);
        // −γ on the complement: each even direction contributes −1, each odd +1.
        let dim_w = self.complement_dim() as i64;
        let sig_w = -(self.space.grading_signature() - self.window.grading_trace);
        inertia.n_pos += ((dim_w + sig_w) / 2) as usize;
        inertia.n_neg += ((dim_w - sig_w) / 2) as usize;
        inertia
    }

    /// Dense `L = V(L_V + V*γV)V* − γ`.
    pub fn full_matrix(&self) -> Result<GradedOperator> {
        let v = &self.window.basis;
        let inner = &self.reduced + &self.window.grading;
        let mut m = v.dot(&inner).dot(&linalg::adjoint(&v.view()));
        for (i, g) in self.space.grading_diagonal().into_iter().enumerate() {
            m[[i, i]] -= g;
        }
        GradedOperator::hermitian(self.space, m, Parity::None)
    }

    fn window_function(&self, values: &[f64]) -> Result<GradedOperator> {
        let v = &self.window.basis;
        let m = scale_cols(v, values).dot(&linalg::adjoint(&v.view()));
        GradedOperator::hermitian(self.space, m, Parity::Even)
    }

    /// Dense `Φ_ρ` (or `P_ρ` for the sharp variant).
    pub fn phi_rho(&self) -> Result<GradedOperator> {
        self.window_function(&self.phi_rho)
    }

    /// Dense `Φ_{2ρ}`.
    pub fn phi_2rho(&self) -> Result<GradedOperator> {
        self.window_function(&self.phi_2rho)
    }

    /// `‖L‖²`.
    pub fn norm_squared(&self) -> f64 {
        self.norm * self.norm
    }
}

fn finish_bundle(
    kind: LocalizerKind,
    params: LocalizerParams,
    space: GradedSpace,
    window: SpectralWindow,
    phi_rho: Vec<f64>,
    phi_2rho: Vec<f64>,
    reduced: Array2<C64>,
) -> Result<LocalizerBundle> {
    let reduced = linalg::hermitian_part(&reduced.view());
    let reduced_eigenvalues = linalg::eigvalsh(&reduced.view())?;
    let has_complement = window.rank() < space.dim();
    let mut norm = reduced_eigenvalues
        .iter()
        .fold(0.0_f64, |m, v| m.max(v.abs()));
    let mut min_abs = reduced_eigenvalues
        .iter()
        .fold(f64::INFINITY, |m, v| m.min(v.abs()));
    if has_complement {
        norm = norm.max(1.0);
        min_abs = min_abs.min(1.0);
    }
    if params.admissible && min_abs <= EPS_INV * norm {
        return Err(Error::InternalConsistency(format!(
            "admissible pair (kappa={}, rho={}) produced a localizer with min |λ| = {min_abs:e}",
            params.kappa, params.rho
        )));
    }
    Ok(LocalizerBundle {
        kind,
        params,
        space,
        window,
        phi_rho,
        phi_2rho,
        reduced,
        reduced_eigenvalues,
        norm,
        min_abs_eigenvalue: min_abs,
    })
}

/// The smooth localizer for the given parameters (admissible or not; the
/// verdict travels in `params`).
pub fn assemble_localizer(
    problem: &IndexProblem,
    phi: &LocalizingFunction,
    params: &LocalizerParams,
) -> Result<LocalizerBundle> {
    let (kappa, rho) = (params.kappa, params.rho);
    let window = SpectralWindow::new(problem.d(), 2.0 * rho * phi.support_radius(), false)?;
    let lam = &window.eigenvalues;
    let phi1: Vec<f64> = lam.iter().map(|&l| phi.eval(l / rho)).collect();
    let phi2: Vec<f64> = lam.iter().map(|&l| phi.eval(l / (2.0 * rho))).collect();
    let comp: Vec<f64> = phi2
        .iter()
        .map(|&p| (1.0 - p.powi(4)).max(0.0).sqrt())
        .collect();

    let space = problem.space();
    let v = &window.basis;
    let hv = problem.h().apply(&v.view())?;
    let gamma_v = grade_rows(&space, v);
    let compressed = linalg::adjoint(&gamma_v.view()).dot(&hv);
    let mut reduced = scale_cols(&scale_rows(&phi1, &compressed), &phi1);
    let dirac: Vec<f64> = lam
        .iter()
        .zip(&phi2)
        .map(|(&l, &p)| kappa * p * l * p)
        .collect();
    add_diag(&mut reduced, &dirac);
    reduced = reduced - scale_rows(&comp, &window.grading);
    finish_bundle(
        LocalizerKind::Smooth,
        *params,
        space,
        window,
        phi1,
        phi2,
        reduced,
    )
}

/// Relative Frobenius residual of
/// `L² = 1 − Φ₂⁴ + κ²D²Φ₂⁴ + Φ₁²H²Φ₁² + κΦ₁d(H)γΦ₁ + Φ₁[Φ₁H,[Φ₁,H]]Φ₁`
/// (`Φ₁ = Φ_ρ`, `Φ₂ = Φ_{2ρ}`), each term evaluated from `H` and `D` in the
/// window frame; both sides equal `1` on the complement.
pub fn square_identity_residual(bundle: &LocalizerBundle, problem: &IndexProblem) -> Result<f64> {
    if bundle.kind != LocalizerKind::Smooth {
        return Err(Error::Contract(
            "square identity applies to the smooth localizer".into(),
        ));
    }
    let kappa = bundle.params.kappa;
    let space = bundle.space;
    let v = &bundle.window.basis;
    let v_adj = linalg::adjoint(&v.view());
    let phi1 = &bundle.phi_rho;
    let phi2 = &bundle.phi_2rho;
    let h = problem.h();
    let d = problem.d();
    let apply_h = |m: &Array2<C64>| h.apply(&m.view());
    let apply_d = |m: &Array2<C64>| d.apply(&m.view());
    // Φ₁·M = V diag(φ₁) V*M.
    let apply_phi1 = |m: &Array2<C64>| v.dot(&scale_rows(phi1, &v_adj.dot(m)));

    let r = bundle.window.rank();
    let mut rhs = Array2::<C64>::zeros((r, r));
    let phi2_4: Vec<f64> = phi2.iter().map(|p| p.powi(4)).collect();
    add_diag(&mut rhs, &vec![1.0; r]);
    add_diag(&mut rhs, &phi2_4.iter().map(|p| -p).collect::<Vec<_>>());

    let dv = apply_d(v)?;
    let d2 = linalg::adjoint(&dv.view()).dot(&dv);
    rhs = rhs + scale_cols(&d2, &phi2_4).mapv(|z| z * kappa * kappa);

    let hv = apply_h(v)?;
    let phi1_sq: Vec<f64> = phi1.iter().map(|p| p * p).collect();
    let h2 = linalg::adjoint(&hv.view()).dot(&hv);
    rhs = rhs + scale_cols(&scale_rows(&phi1_sq, &h2), &phi1_sq);

    let p1 = scale_cols(v, phi1);
    let z = grade_rows(&space, &p1);
    let dhz = apply_d(&apply_h(&z)?)?;
    let hdz = apply_h(&apply_d(&z)?)?;
    let derivation = scale_rows(phi1, &v_adj.dot(&(dhz - hdz)));
    rhs = rhs + derivation.mapv(|z| z * kappa);

    let hp1 = scale_cols(&hv, phi1);
    let commutator = |m: &Array2<C64>| -> Result<Array2<C64>> {
        Ok(apply_phi1(&apply_h(m)?) - apply_h(&apply_phi1(m))?)
    };
    let k_p1 = commutator(&p1)?;
    let phi1_h_p1 = apply_phi1(&hp1);
    let outer = apply_phi1(&apply_h(&k_p1)?) - commutator(&phi1_h_p1)?;
    rhs = rhs + scale_rows(phi1, &v_adj.dot(&outer));

    let lhs = bundle.reduced.dot(&bundle.reduced);
    let residual = linalg::frobenius(&(lhs - rhs).view());
    Ok(residual / bundle.norm_squared().max(1.0))
}

/// Smallest eigenvalue of
/// `L² − [1 − Φ₂⁴ + (κ²ρ²/4 − C)(Φ₂⁴ − Φ₁⁴) + (g² − C)Φ₁⁴]`.
pub fn lower_bound_residual(bundle: &LocalizerBundle) -> Result<f64> {
    if bundle.kind != LocalizerKind::Smooth {
        return Err(Error::Contract(
            "lower bound applies to the smooth localizer".into(),
        ));
    }
    let p = &bundle.params;
    let a = p.kappa * p.kappa * p.rho * p.rho / 4.0 - p.c_kr;
    let b = p.gap * p.gap - p.c_kr;
    let bound: Vec<f64> = bundle
        .phi_rho
        .iter()
        .zip(&bundle.phi_2rho)
        .map(|(f1, f2)| {
            let (f1, f2) = (f1.powi(4), f2.powi(4));
            -(1.0 - f2 + a * (f2 - f1) + b * f1)
        })
        .collect();
    let mut m = bundle.reduced.dot(&bundle.reduced);
    add_diag(&mut m, &bound);
    let lowest = linalg::eigvalsh(&linalg::hermitian_part(&m.view()).view())?
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    if bundle.complement_dim() > 0 {
        Ok(lowest.min(0.0))
    } else {
        Ok(lowest)
    }
}

/// `‖(L + γ)(1 − R_{2ρ})‖_F` with `R_{2ρ}` the spectral projection of `D`
/// onto `|λ| ≤ 2ρ`, from the dense localizer.
pub fn compact_support_residual(bundle: &LocalizerBundle, problem: &IndexProblem) -> Result<f64> {
    let l = bundle.full_matrix()?;
    let spectrum = problem.d().spectrum()?;
    let outside = spectrum.select(|x| x.abs() > 2.0 * bundle.params.rho);
    let w = spectrum.eigenvectors().select(Axis(1), &outside);
    let gamma_w = grade_rows(&bundle.space, &w);
    let lw = l.matrix().dot(&w) + gamma_w;
    Ok(linalg::frobenius(&lw.view()))
}

/// `L = γ(PHP − (1 − P)) + κPDP` with `P = 1_{(−ρ,ρ)}(D)`.
///
/// Requires `PΦ_ρ = Φ_ρ` and `PΦ_{2ρ} = P` for `φ` on the spectrum of `D`;
/// the admissibility verdict is computed for `(κ, ρ)` with the same `φ`.
pub fn sharp_localizer(
    problem: &IndexProblem,
    phi: &LocalizingFunction,
    kappa: f64,
    rho: f64,
) -> Result<LocalizerBundle> {
    let params = constant_c(kappa, rho, problem, phi)?;
    let window = SpectralWindow::new(problem.d(), rho, true)?;
    check_sharp_hypotheses(problem.d(), phi, rho)?;
    let space = problem.space();
    let v = &window.basis;
    let hv = problem.h().apply(&v.view())?;
    let gamma_v = grade_rows(&space, v);
    let mut reduced = linalg::adjoint(&gamma_v.view()).dot(&hv);
    let dirac: Vec<f64> = window.eigenvalues.iter().map(|&l| kappa * l).collect();
    add_diag(&mut reduced, &dirac);
    let ones = vec![1.0; window.rank()];
    finish_bundle(
        LocalizerKind::Sharp,
        params,
        space,
        window,
        ones.clone(),
        ones,
        reduced,
    )
}

fn check_sharp_hypotheses(d: &GradedOperator, phi: &LocalizingFunction, rho: f64) -> Result<()> {
    let spectrum = d.spectrum()?;
    let mut failures = Vec::new();
    if let Some(l) = spectrum
        .eigenvalues()
        .iter()
        .find(|l| l.abs() >= rho && phi.eval(*l / rho) != 0.0)
    {
        failures.push(format!(
            "P Φ_ρ = Φ_ρ fails: φ({}/ρ) ≠ 0 outside the window",
            l
        ));
    }
    if let Some(l) = spectrum
        .eigenvalues()
        .iter()
        .find(|l| l.abs() < rho && phi.eval(*l / (2.0 * rho)) != 1.0)
    {
        failures.push(format!(
            "P Φ_2ρ = P fails: φ({}/2ρ) ≠ 1 inside the window",
            l
        ));
    }
    if failures.is_empty() {
        Ok(())
    } else {
        Err(Error::Precondition(failures.join("; ")))
    }
}

/// One `(κ, ρ)` cell of a parameter sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub kappa: f64,
    pub rho: f64,
    #[serde(rename = "C_kr")]
    pub c_kr: f64,
    pub admissible: bool,
    /// `ρ ≤ ρ_max`, so the truncation does not reach the window.
    pub resolved: bool,
    pub min_abs_eig: f64,
    pub signature: i64,
}

/// Evaluate the localizer on every grid cell, in parallel, rows in
/// `kappa`-major order.
pub fn sweep(
    problem: &IndexProblem,
    phi: &LocalizingFunction,
    kappas: &[f64],
    rhos: &[f64],
    tau_rel: f64,
) -> Result<Vec<SweepRow>> {
    problem.dh_norm()?;
    phi.fourier()?;
    let cells: Vec<(f64, f64)> = kappas
        .iter()
        .flat_map(|&k| rhos.iter().map(move |&r| (k, r)))
        .collect();
    cells
        .par_iter()
        .map(|&(kappa, rho)| {
            let params = constant_c(kappa, rho, problem, phi)?;
            let bundle = assemble_localizer(problem, phi, &params)?;
            Ok(SweepRow {
                kappa,
                rho,
                c_kr: params.c_kr,
                admissible: params.admissible,
                resolved: problem.resolves(rho),
                min_abs_eig: bundle.min_abs_eigenvalue,
                signature: bundle.inertia(tau_rel).signature(),
            })
        })
        .collect()
}

/// `‖d(T)‖` for a general operator `T`.
pub fn derivative_norm(d: &GradedOperator, t: &GradedOperator) -> Result<f64> {
    operator_norm(&crate::operator::lipschitz_derivative(d, t)?)
}
