//! Seeded verification suites: analytic bounds, exact identities and
//! homotopy invariance, each check reporting its measured value against the
//! contract.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ktheory::{homotopy_stability, CommonPair};
use crate::linalg;
use crate::localizer::{
    assemble_localizer, choose_params, compact_support_residual, constant_c, derivative_norm,
    lower_bound_residual, square_identity_residual, IndexProblem, DEFAULT_MARGIN,
};
use crate::localizing::LocalizingFunction;
use crate::models::{oscillator_dirac, oscillator_with_h, random_instance, random_lipschitz};
use crate::operator::{func_calc, operator_norm, GradedOperator, GradedSpace, Parity};

pub const IDENTITY_TOLERANCE: f64 = 1e-9;
pub const LOWER_BOUND_TOLERANCE: f64 = 1e-9;
pub const CERTIFICATE_TOLERANCE: f64 = 1e-9;
/// Slack for roundoff in the norm computations of the analytic bounds.
pub const BOUND_ROUNDOFF: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Bounds,
    Identities,
    Homotopy,
    All,
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bounds" => Ok(Suite::Bounds),
            "identities" => Ok(Suite::Identities),
            "homotopy" => Ok(Suite::Homotopy),
            "all" => Ok(Suite::All),
            other => Err(Error::Parse(format!(
                "unknown suite {other:?}; expected bounds, identities, homotopy or all"
            ))),
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Suite::Bounds => "bounds",
            Suite::Identities => "identities",
            Suite::Homotopy => "homotopy",
            Suite::All => "all",
        })
    }
}

/// Whether `measured` must stay below or above `contract`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    AtMost,
    AtLeast,
    Equal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub suite: String,
    pub name: String,
    pub seed: u64,
    pub measured: f64,
    pub contract: f64,
    pub direction: Direction,
    pub passed: bool,
    #[serde(skip_serializing_if = "String::is_empty", default)]
    pub detail: String,
}

impl Check {
    fn new(
        suite: Suite,
        name: &str,
        seed: u64,
        measured: f64,
        contract: f64,
        direction: Direction,
    ) -> Self {
        let passed = match direction {
            Direction::AtMost => measured <= contract,
            Direction::AtLeast => measured >= contract,
            Direction::Equal => measured == contract,
        };
        Self {
            suite: suite.to_string(),
            name: name.to_string(),
            seed,
            measured,
            contract,
            direction,
            passed,
            detail: String::new(),
        }
    }

    fn failed(suite: Suite, name: &str, seed: u64, error: &Error) -> Self {
        Self {
            suite: suite.to_string(),
            name: name.to_string(),
            seed,
            measured: f64::NAN,
            contract: f64::NAN,
            direction: Direction::AtMost,
            passed: false,
            detail: error.to_string(),
        }
    }

    fn with_detail(mut self, detail: String) -> Self {
        self.detail = detail;
        self
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let op = match self.direction {
            Direction::AtMost => "<=",
            Direction::AtLeast => ">=",
            Direction::Equal => "==",
        };
        write!(
            f,
            "[{}] {}/{} seed={} measured={:.6e} {op} {:.6e}",
            if self.passed { "PASS" } else { "FAIL" },
            self.suite,
            self.name,
            self.seed,
            self.measured,
            self.contract
        )?;
        if !self.detail.is_empty() {
            write!(f, " ({})", self.detail)?;
        }
        Ok(())
    }
}

/// Sizes of the seeded corpora.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteSizes {
    pub bound_instances: usize,
    pub identity_instances: usize,
    pub max_half_dim: usize,
}

impl Default for SuiteSizes {
    fn default() -> Self {
        Self {
            bound_instances: 200,
            identity_instances: 100,
            max_half_dim: 40,
        }
    }
}

fn instance_seed(base: u64, i: usize) -> u64 {
    base.wrapping_mul(1_000_003).wrapping_add(i as u64)
}

/// A random odd hermitian `D` with spectrum spread over roughly `[−4, 4]`.
pub fn random_dirac(rng: &mut ChaCha8Rng, n_plus: usize, n_minus: usize) -> Result<GradedOperator> {
    let space = GradedSpace::new(n_plus, n_minus)?;
    let d0 = linalg::random_complex_matrix(rng, n_minus, n_plus);
    let d = GradedOperator::from_odd_block(space, d0.view())?;
    let scale = 4.0 / operator_norm(&d)?.max(1e-12);
    Ok(d.scale(scale))
}

/// `‖[φ(D/ρ), T]‖` against `(weight + tail)·‖d(T)‖/(ρ√(2π))` for random `D`,
/// hermitian `T` and `ρ ∈ [0.25, 4]`.
pub fn commutator_bound(phi: &LocalizingFunction, seed: u64, max_half_dim: usize) -> Result<Check> {
    let fourier = phi.fourier()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (np, nm) = (
        rng.gen_range(1..=max_half_dim),
        rng.gen_range(1..=max_half_dim),
    );
    let d = random_dirac(&mut rng, np, nm)?;
    let t = GradedOperator::hermitian(
        d.space(),
        linalg::random_hermitian(&mut rng, np + nm),
        Parity::None,
    )?;
    let rho = rng.gen_range(0.25..4.0);
    let phi_rho = func_calc(|x| phi.eval(x / rho), &d)?;
    let commutator = phi_rho.compose(&t)?.sub(&t.compose(&phi_rho)?)?;
    let measured = operator_norm(&commutator)?;
    let dt = derivative_norm(&d, &t)?;
    let bound = (fourier.weight + fourier.tail_bound) * dt / (rho * (2.0 * PI).sqrt());
    Ok(Check::new(
        Suite::Bounds,
        "commutator",
        seed,
        measured,
        bound * (1.0 + BOUND_ROUNDOFF) + BOUND_ROUNDOFF,
        Direction::AtMost,
    )
    .with_detail(format!("dim={} rho={rho:.4}", np + nm)))
}

/// `‖φ(D + R) − φ(D)‖` against `(weight + tail)·‖R‖/√(2π)` for random
/// hermitian `D` and `R` with `‖R‖ ∈ [0.01, 1]`.
pub fn perturbation_bound(
    phi: &LocalizingFunction,
    seed: u64,
    max_half_dim: usize,
) -> Result<Check> {
    let fourier = phi.fourier()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(2..=2 * max_half_dim);
    let space = GradedSpace::new(n, 1)?;
    let dim = space.dim();
    let d =
        GradedOperator::hermitian(space, linalg::random_hermitian(&mut rng, dim), Parity::None)?;
    let d = d.scale(2.0 / operator_norm(&d)?.max(1e-12));
    let r =
        GradedOperator::hermitian(space, linalg::random_hermitian(&mut rng, dim), Parity::None)?;
    let r_size = rng.gen_range(0.01..1.0);
    let r = r.scale(r_size / operator_norm(&r)?.max(1e-12));
    let perturbed = d.add(&r)?.into_hermitian()?;
    let diff = func_calc(|x| phi.eval(x), &perturbed)?.sub(&func_calc(|x| phi.eval(x), &d)?)?;
    let measured = operator_norm(&diff)?;
    let bound = (fourier.weight + fourier.tail_bound) * operator_norm(&r)? / (2.0 * PI).sqrt();
    Ok(Check::new(
        Suite::Bounds,
        "perturbation",
        seed,
        measured,
        bound * (1.0 + BOUND_ROUNDOFF) + BOUND_ROUNDOFF,
        Direction::AtMost,
    )
    .with_detail(format!("dim={dim} |R|={r_size:.4}")))
}

/// A seeded random pairing of total dimension at most `2·max_half_dim`.
pub fn random_problem(seed: u64, max_half_dim: usize) -> Result<IndexProblem> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let np = rng.gen_range(2..=max_half_dim);
    let nm = rng.gen_range(2..=max_half_dim);
    let strength = rng.gen_range(0.01..0.3);
    let model = random_instance(np, nm, strength, seed)?;
    Ok(model.problem()?.clone())
}

/// `(κ, ρ)` pairs exercised on one problem: the selected admissible pair
/// and a pair whose window cuts through the spectrum of `D`.
fn identity_pairs(
    problem: &IndexProblem,
    phi: &LocalizingFunction,
    seed: u64,
) -> Result<Vec<(String, f64, f64)>> {
    let mut pairs = Vec::new();
    if let Ok(p) = choose_params(problem, phi, DEFAULT_MARGIN) {
        pairs.push(("auto".to_string(), p.kappa, p.rho));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
    let rho = rng.gen_range(0.3..1.5) * problem.d_norm().max(1.0) / 2.0;
    let rho = problem.rho_max().map_or(rho, |m| rho.min(m));
    pairs.push(("cut".to_string(), rng.gen_range(0.2..2.0), rho));
    Ok(pairs)
}

/// Square identity, lower bound, invertibility certificate and the
/// `−γ` complement for one problem.
pub fn identity_checks(
    problem: &IndexProblem,
    phi: &LocalizingFunction,
    seed: u64,
    label: &str,
) -> Vec<Check> {
    let run = || -> Result<Vec<Check>> {
        let mut checks = Vec::new();
        for (tag, kappa, rho) in identity_pairs(problem, phi, seed)? {
            let params = constant_c(kappa, rho, problem, phi)?;
            let bundle = assemble_localizer(problem, phi, &params)?;
            let detail = format!(
                "{label} {tag} kappa={kappa:.4} rho={rho:.4} admissible={}",
                params.admissible
            );
            checks.push(
                Check::new(
                    Suite::Identities,
                    "square_identity",
                    seed,
                    square_identity_residual(&bundle, problem)?,
                    IDENTITY_TOLERANCE,
                    Direction::AtMost,
                )
                .with_detail(detail.clone()),
            );
            checks.push(
                Check::new(
                    Suite::Identities,
                    "lower_bound",
                    seed,
                    lower_bound_residual(&bundle)?,
                    -LOWER_BOUND_TOLERANCE * bundle.norm_squared(),
                    Direction::AtLeast,
                )
                .with_detail(detail.clone()),
            );
            checks.push(
                Check::new(
                    Suite::Identities,
                    "compact_support",
                    seed,
                    compact_support_residual(&bundle, problem)?,
                    IDENTITY_TOLERANCE,
                    Direction::AtMost,
                )
                .with_detail(detail.clone()),
            );
            if params.admissible {
                let observed = bundle.min_abs_eigenvalue.powi(2);
                checks.push(
                    Check::new(
                        Suite::Identities,
                        "invertibility_certificate",
                        seed,
                        observed,
                        params.certified_gap_squared() - CERTIFICATE_TOLERANCE,
                        Direction::AtLeast,
                    )
                    .with_detail(detail),
                );
            }
        }
        Ok(checks)
    };
    run().unwrap_or_else(|e| vec![Check::failed(Suite::Identities, "identity_setup", seed, &e)])
}

/// Oscillator with a random Lipschitz `H` of small coupling.
pub fn perturbed_oscillator(n: usize, strength: f64, seed: u64) -> Result<IndexProblem> {
    let base = oscillator_dirac(n)?;
    let generated = random_lipschitz(base.problem()?.d(), strength, seed)?;
    Ok(oscillator_with_h(n, generated.h)?.problem()?.clone())
}

/// `H_t = H·|H|^{−t}` at `steps` equally spaced `t ∈ [0, 1]`.
pub fn phase_path(problem: &IndexProblem, steps: usize) -> Result<Vec<IndexProblem>> {
    (0..steps)
        .map(|i| {
            let t = i as f64 / (steps - 1).max(1) as f64;
            let h = func_calc(|x| x * x.abs().powf(-t), problem.h())?;
            problem.with_h(h)
        })
        .collect()
}

/// `D + tT` at `steps` equally spaced `t ∈ [0, 1]`, `T` random odd hermitian
/// of norm `size`.
pub fn dirac_path(
    problem: &IndexProblem,
    size: f64,
    steps: usize,
    seed: u64,
) -> Result<Vec<IndexProblem>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let space = problem.space();
    let t0 = linalg::random_complex_matrix(&mut rng, space.n_minus(), space.n_plus());
    let t = GradedOperator::from_odd_block(space, t0.view())?;
    let t = t.scale(size / operator_norm(&t)?.max(1e-12));
    (0..steps)
        .map(|i| {
            let s = i as f64 / (steps - 1).max(1) as f64;
            let d = problem.d().add(&t.scale(s))?.into_hermitian()?;
            let d = GradedOperator::hermitian(space, d.into_matrix(), Parity::Odd)?;
            problem.with_d(d)
        })
        .collect()
}

fn homotopy_check(
    name: &str,
    seed: u64,
    path: Result<Vec<IndexProblem>>,
    phi: &LocalizingFunction,
) -> Check {
    let outcome = path.and_then(|p| {
        homotopy_stability(
            &p,
            phi,
            CommonPair::Auto {
                margin: DEFAULT_MARGIN,
            },
        )
    });
    match outcome {
        Ok(report) => {
            let classes: Vec<String> = report.steps.iter().map(|s| s.class.to_string()).collect();
            let worst = report
                .steps
                .iter()
                .filter_map(|s| s.displacement.map(|d| d / s.min_gap))
                .fold(0.0, f64::max);
            let mut check = Check::new(Suite::Homotopy, name, seed, worst, 1.0, Direction::AtMost);
            check.passed = report.stable();
            check.with_detail(format!(
                "classes=[{}] kappa={:.4} rho={:.4}{}",
                classes.join(","),
                report.kappa,
                report.rho,
                report
                    .failure
                    .map(|f| format!(" failure: {f}"))
                    .unwrap_or_default()
            ))
        }
        Err(e) => Check::failed(Suite::Homotopy, name, seed, &e),
    }
}

/// Run one suite (or all) with the given base seed.
pub fn run_suite(
    suite: Suite,
    seed: u64,
    phi: &LocalizingFunction,
    sizes: SuiteSizes,
) -> Result<Vec<Check>> {
    phi.fourier()?;
    let mut checks = Vec::new();
    let wants = |s: Suite| suite == Suite::All || suite == s;
    if wants(Suite::Bounds) {
        let bound_checks: Vec<Check> = (0..sizes.bound_instances)
            .into_par_iter()
            .flat_map_iter(|i| {
                let s = instance_seed(seed, i);
                [
                    commutator_bound(phi, s, sizes.max_half_dim)
                        .unwrap_or_else(|e| Check::failed(Suite::Bounds, "commutator", s, &e)),
                    perturbation_bound(phi, s, sizes.max_half_dim)
                        .unwrap_or_else(|e| Check::failed(Suite::Bounds, "perturbation", s, &e)),
                ]
            })
            .collect();
        checks.extend(bound_checks);
    }
    if wants(Suite::Identities) {
        let random: Vec<Check> = (0..sizes.identity_instances)
            .into_par_iter()
            .flat_map_iter(|i| {
                let s = instance_seed(seed, i);
                match random_problem(s, sizes.max_half_dim) {
                    Ok(p) => identity_checks(&p, phi, s, "random"),
                    Err(e) => vec![Check::failed(Suite::Identities, "identity_setup", s, &e)],
                }
            })
            .collect();
        checks.extend(random);
        for (label, problem) in [
            (
                "oscillator:n=40",
                oscillator_dirac(40).and_then(|m| Ok(m.problem()?.clone())),
            ),
            (
                "oscillator:n=40,strength=0.002",
                perturbed_oscillator(40, 0.002, seed),
            ),
        ] {
            match problem {
                Ok(p) => checks.extend(identity_checks(&p, phi, seed, label)),
                Err(e) => checks.push(Check::failed(Suite::Identities, "identity_setup", seed, &e)),
            }
        }
    }
    if wants(Suite::Homotopy) {
        let base = perturbed_oscillator(60, 0.002, seed);
        match base {
            Ok(problem) => {
                checks.push(homotopy_check(
                    "phase_path",
                    seed,
                    phase_path(&problem, 5),
                    phi,
                ));
                checks.push(homotopy_check(
                    "dirac_path",
                    seed,
                    dirac_path(&problem, 0.005, 5, seed),
                    phi,
                ));
            }
            Err(e) => checks.push(Check::failed(Suite::Homotopy, "homotopy_setup", seed, &e)),
        }
    }
    Ok(checks)
}
