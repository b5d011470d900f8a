use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;

use localizer_core::ktheory::{
    half_signature, half_signature_class, localizer_index, positive_projection,
    sharp_formula_index, trace_class, uncertified_localizer_index, ClassReport, Inertia,
    ParamSelection,
};
use localizer_core::localizer::{sweep, IndexProblem, SweepRow};
use localizer_core::localizing::{
    default_localizer_with, validate_localizing, FourierWeight, ValidationReport,
};
use localizer_core::models::{build_model, ModelDescriptor};
use localizer_core::operator::OperatorMetadata;
use localizer_core::oracle::{chern_number_bz, compressed_index, graded_kernel_index, IndexResult};
use localizer_core::verify::{run_suite, Check, Suite, SuiteSizes};
use localizer_core::{linalg, LocalizingFunction};
use serde::Serialize;

use crate::config::{Format, RunConfig};
use crate::Failure;

/// Slack on the invertibility certificate `min |λ(L)|² ≥ min(1, g² − C, κ²ρ²/4 − C)`.
pub const CERTIFICATE_SLACK: f64 = 1e-9;

/// Text to emit and the exit status it carries.
#[derive(Debug)]
pub struct Outcome {
    pub output: String,
    pub code: i32,
    /// Printed on stderr whatever `--out` says.
    pub message: Option<String>,
}

fn phi(cfg: &RunConfig) -> Result<LocalizingFunction, Failure> {
    Ok(default_localizer_with(
        cfg.smoothing_width(),
        cfg.quadrature(),
    )?)
}

fn to_json<T: Serialize>(value: &T) -> Result<String, Failure> {
    let mut text =
        serde_json::to_string_pretty(value).map_err(|e| Failure::Verification(e.to_string()))?;
    text.push('\n');
    Ok(text)
}

#[derive(Debug, Serialize)]
struct Certificate {
    admissible: bool,
    certified_gap_squared: f64,
    observed_gap_squared: f64,
    passed: bool,
}

#[derive(Debug, Serialize)]
struct Triangle {
    localizer: Option<i64>,
    sharp_formula: Option<i64>,
    graded_kernel: Option<i64>,
    compressed: Option<i64>,
    chern_bz: Option<i64>,
    half_signature: Option<i64>,
    trace: Option<i64>,
    rank: Option<i64>,
}

impl Triangle {
    fn values(&self) -> Vec<(&'static str, i64)> {
        [
            ("localizer", self.localizer),
            ("sharp_formula", self.sharp_formula),
            ("graded_kernel", self.graded_kernel),
            ("compressed", self.compressed),
            ("chern_bz", self.chern_bz),
            ("half_signature", self.half_signature),
            ("trace", self.trace),
            ("rank", self.rank),
        ]
        .into_iter()
        .filter_map(|(k, v)| v.map(|v| (k, v)))
        .collect()
    }

    fn agree(&self) -> bool {
        let values = self.values();
        values.windows(2).all(|w| w[0].1 == w[1].1)
    }

    fn describe(&self) -> String {
        self.values()
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

#[derive(Debug, Serialize)]
struct ComputeReport {
    model: String,
    parameters: BTreeMap<String, f64>,
    model_reports: BTreeMap<String, f64>,
    mode: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    localizer: Option<ClassReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    localizer_index: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sharp_formula_error: Option<String>,
    oracles: BTreeMap<String, IndexResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    certificate: Option<Certificate>,
    values: Triangle,
    agreement: bool,
    passed: bool,
}

fn compute_pairing(
    cfg: &RunConfig,
    model: &ModelDescriptor,
    problem: &IndexProblem,
) -> Result<ComputeReport, Failure> {
    let d = problem.d();
    let residual = d.spectrum()?.reconstruction_residual(&d.matrix().view())?;
    if residual > cfg.eps_eig() {
        return Err(Failure::Usage(format!(
            "eigendecomposition of D reconstructs with residual {residual:.3e} > eps_eig = {:.3e}",
            cfg.eps_eig()
        )));
    }
    let phi = phi(cfg)?;
    let uncertified = cfg.uncertified.unwrap_or(false);
    let selection = cfg.selection()?;
    let index = match (uncertified, selection) {
        (false, s) => localizer_index(problem, &phi, s)?,
        (true, ParamSelection::Fixed { kappa, rho }) => {
            uncertified_localizer_index(problem, &phi, kappa, rho)?
        }
        (true, ParamSelection::Auto { .. }) => {
            return Err(Failure::Usage(
                "--uncertified needs explicit --kappa and --rho".into(),
            ))
        }
    };
    let space = problem.space();
    let variant = index.bundle.inertia(cfg.tau_sig());
    if !variant.is_invertible() {
        return Err(Failure::Usage(format!(
            "localizer has {} eigenvalues within tau_sig = {:.3e} of zero (relative)",
            variant.n_zero,
            cfg.tau_sig()
        )));
    }
    let reference = Inertia {
        n_pos: space.n_minus(),
        n_neg: space.n_plus(),
        n_zero: 0,
    };
    let value = half_signature(&reference, &variant)?;
    let mut report = index.report.clone();
    report.class = value;
    report.signature_var = variant.signature();

    let (sharp_formula, sharp_formula_error) =
        match sharp_formula_index(problem, index.params.kappa, index.params.rho) {
            Ok(v) => (Some(v), None),
            Err(e) => (None, Some(e.to_string())),
        };

    let mut oracles = BTreeMap::new();
    let h = problem.h();
    if h.matrix() == &linalg::identity(h.dim()) {
        oracles.insert(
            "graded_kernel".to_string(),
            graded_kernel_index(d, cfg.tau_rank())?,
        );
    }
    let q = positive_projection(h)?;
    oracles.insert(
        "compressed".to_string(),
        compressed_index(&q, d, cfg.tau_rank())?,
    );
    if let Some(bloch) = model.bloch() {
        oracles.insert(
            "chern_bz".to_string(),
            chern_number_bz(bloch, cfg.chern_grid())?,
        );
    }

    let params = &index.params;
    let observed = index.bundle.min_abs_eigenvalue.powi(2);
    let certified_gap_squared = params.certified_gap_squared();
    let certificate = Certificate {
        admissible: params.admissible,
        certified_gap_squared,
        observed_gap_squared: observed,
        passed: params.admissible && observed >= certified_gap_squared - CERTIFICATE_SLACK,
    };
    let values = Triangle {
        localizer: Some(value),
        sharp_formula,
        graded_kernel: oracles.get("graded_kernel").map(|r| r.value),
        compressed: oracles.get("compressed").map(|r| r.value),
        chern_bz: oracles.get("chern_bz").map(|r| r.value),
        half_signature: None,
        trace: None,
        rank: None,
    };
    let agreement = values.agree();
    let passed = agreement && certificate.passed && oracles.values().all(|r| r.reliable);
    Ok(ComputeReport {
        model: model.descriptor(),
        parameters: model.parameters.clone(),
        model_reports: model.reports.clone(),
        mode: if uncertified {
            "uncertified"
        } else {
            "certified"
        },
        localizer: Some(report),
        localizer_index: Some(value),
        sharp_formula_error,
        oracles,
        certificate: Some(certificate),
        values,
        agreement,
        passed,
    })
}

fn compute_relative(cfg: &RunConfig, model: &ModelDescriptor) -> Result<ComputeReport, Failure> {
    let (class, rank) = model
        .relative_class()
        .ok_or_else(|| Failure::Usage("model carries neither a pairing nor a class".into()))?;
    let values = Triangle {
        localizer: None,
        sharp_formula: None,
        graded_kernel: None,
        compressed: None,
        chern_bz: None,
        half_signature: Some(half_signature_class(class, cfg.tau_sig())?),
        trace: Some(trace_class(class)?),
        rank: Some(rank as i64),
    };
    let agreement = values.agree();
    Ok(ComputeReport {
        model: model.descriptor(),
        parameters: model.parameters.clone(),
        model_reports: model.reports.clone(),
        mode: "relative",
        localizer: None,
        localizer_index: None,
        sharp_formula_error: None,
        oracles: BTreeMap::new(),
        certificate: None,
        values,
        agreement,
        passed: agreement,
    })
}

pub fn compute(cfg: &RunConfig) -> Result<Outcome, Failure> {
    let model = build_model(cfg.model()?)?;
    let report = match model.problem() {
        Ok(problem) => compute_pairing(cfg, &model, problem)?,
        Err(_) => compute_relative(cfg, &model)?,
    };
    let output = match cfg.format() {
        Format::Json => to_json(&report)?,
        Format::Csv => {
            let mut text = String::from("quantity,value\n");
            for (k, v) in report.values.values() {
                let _ = writeln!(text, "{k},{v}");
            }
            let _ = writeln!(text, "agreement,{}", report.agreement);
            let _ = writeln!(text, "passed,{}", report.passed);
            text
        }
    };
    let (code, message) = if !report.agreement {
        (
            3,
            Some(format!("index disagreement: {}", report.values.describe())),
        )
    } else if !report.passed {
        (
            1,
            Some(format!(
                "certificate not established: {}",
                report.values.describe()
            )),
        )
    } else {
        (0, None)
    };
    Ok(Outcome {
        output,
        code,
        message,
    })
}

#[derive(Debug, Serialize)]
struct SweepCell {
    #[serde(flatten)]
    row: SweepRow,
    class: Option<i64>,
}

#[derive(Debug, Serialize)]
struct SweepSummary {
    cells: usize,
    admissible_cells: usize,
    classes: Vec<i64>,
    constant: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    warning: Option<String>,
}

#[derive(Debug, Serialize)]
struct SweepReport {
    model: String,
    rows: Vec<SweepCell>,
    summary: SweepSummary,
}

pub fn sweep_grid(cfg: &RunConfig) -> Result<Outcome, Failure> {
    let kappas = cfg.kappas.clone().unwrap_or_default();
    let rhos = cfg.rhos.clone().unwrap_or_default();
    if kappas.is_empty() || rhos.is_empty() {
        return Err(Failure::Usage(
            "sweep needs non-empty --kappas and --rhos".into(),
        ));
    }
    if let Some(v) = kappas
        .iter()
        .chain(&rhos)
        .find(|v| !(**v > 0.0 && v.is_finite()))
    {
        return Err(Failure::Usage(format!(
            "grid values must be positive, got {v}"
        )));
    }
    let model = build_model(cfg.model()?)?;
    let problem = model.problem()?;
    let space = problem.space();
    let reference = space.n_minus() as i64 - space.n_plus() as i64;
    let rows = sweep(problem, &phi(cfg)?, &kappas, &rhos, cfg.tau_sig())?;
    let cells: Vec<SweepCell> = rows
        .into_iter()
        .map(|row| {
            let invertible = row.min_abs_eig > 0.0;
            let difference = row.signature - reference;
            let class = (invertible && difference % 2 == 0).then_some(difference / 2);
            SweepCell { row, class }
        })
        .collect();
    let certified: Vec<&SweepCell> = cells
        .iter()
        .filter(|c| c.row.admissible && c.row.resolved)
        .collect();
    let mut classes: Vec<i64> = certified.iter().filter_map(|c| c.class).collect();
    classes.sort_unstable();
    classes.dedup();
    let constant = classes.len() <= 1 && certified.iter().all(|c| c.class.is_some());
    let warning = certified
        .is_empty()
        .then(|| "no admissible cell within the truncation; nothing to compare".to_string());
    let summary = SweepSummary {
        cells: cells.len(),
        admissible_cells: certified.len(),
        classes,
        constant,
        warning,
    };
    let code = if constant { 0 } else { 3 };
    let message = match (&summary.warning, constant) {
        (Some(w), _) => Some(format!("warning: {w}")),
        (None, false) => Some(format!(
            "admissible cells disagree: classes {:?}",
            summary.classes
        )),
        (None, true) => None,
    };
    let report = SweepReport {
        model: model.descriptor(),
        rows: cells,
        summary,
    };
    let output = match cfg.format() {
        Format::Json => to_json(&report)?,
        Format::Csv => {
            let mut text =
                String::from("kappa,rho,C_kr,admissible,resolved,min_abs_eig,signature,class\n");
            for c in &report.rows {
                let r = &c.row;
                let _ = writeln!(
                    text,
                    "{},{},{},{},{},{},{},{}",
                    r.kappa,
                    r.rho,
                    r.c_kr,
                    r.admissible,
                    r.resolved,
                    r.min_abs_eig,
                    r.signature,
                    c.class.map(|v| v.to_string()).unwrap_or_default()
                );
            }
            let s = &report.summary;
            let _ = writeln!(
                text,
                "# summary: {} of {} cells admissible; classes {:?}; constant = {}",
                s.admissible_cells, s.cells, s.classes, s.constant
            );
            text
        }
    };
    Ok(Outcome {
        output,
        code,
        message,
    })
}

#[derive(Debug, Serialize)]
struct VerifyReport {
    suite: Suite,
    seed: u64,
    total: usize,
    failed: usize,
    checks: Vec<Check>,
}

/// Per-check lines go to stdout; `--out` additionally receives the
/// structured report.
pub fn verify(cfg: &RunConfig, suite: Suite) -> Result<(Outcome, String), Failure> {
    let checks = run_suite(suite, cfg.seed(), &phi(cfg)?, SuiteSizes::default())?;
    let failed = checks.iter().filter(|c| !c.passed).count();
    let mut lines = String::new();
    for c in &checks {
        let _ = writeln!(lines, "{c}");
    }
    let _ = writeln!(lines, "{} checks, {failed} failed", checks.len());
    let report = VerifyReport {
        suite,
        seed: cfg.seed(),
        total: checks.len(),
        failed,
        checks,
    };
    let output = match cfg.format() {
        Format::Json => to_json(&report)?,
        Format::Csv => {
            let mut text = String::from("suite,name,seed,measured,contract,passed,detail\n");
            for c in &report.checks {
                let _ = writeln!(
                    text,
                    "{},{},{},{},{},{},\"{}\"",
                    c.suite,
                    c.name,
                    c.seed,
                    c.measured,
                    c.contract,
                    c.passed,
                    c.detail.replace('"', "'")
                );
            }
            text
        }
    };
    let message = (failed > 0).then(|| {
        let seeds: Vec<String> = report
            .checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| format!("{}/{} seed={}", c.suite, c.name, c.seed))
            .collect();
        format!("verification failed: {}", seeds.join(", "))
    });
    let code = if failed > 0 { 1 } else { 0 };
    Ok((
        Outcome {
            output,
            code,
            message,
        },
        lines,
    ))
}

#[derive(Debug, Serialize)]
struct PhiReport {
    name: String,
    smoothing_width: f64,
    support_radius: f64,
    fourier: FourierWeight,
    c_phi_upper: f64,
    validation: ValidationReport,
}

pub fn export_phi(cfg: &RunConfig, step: f64) -> Result<Outcome, Failure> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Failure::Usage(format!(
            "--step must be positive, got {step}"
        )));
    }
    let phi = phi(cfg)?;
    let output = match cfg.format() {
        Format::Csv => {
            let mut buffer = Vec::new();
            phi.write_csv(&mut buffer, step)?;
            String::from_utf8(buffer).map_err(|e| Failure::Verification(e.to_string()))?
        }
        Format::Json => {
            let fourier = phi.fourier()?.clone();
            to_json(&PhiReport {
                name: phi.name().to_string(),
                smoothing_width: cfg.smoothing_width(),
                support_radius: phi.support_radius(),
                c_phi_upper: fourier.c_phi_upper(),
                fourier,
                validation: validate_localizing(&phi, step)?,
            })?
        }
    };
    Ok(Outcome {
        output,
        code: 0,
        message: None,
    })
}

#[derive(Debug, Serialize)]
struct ModelManifest {
    model: String,
    parameters: BTreeMap<String, f64>,
    reports: BTreeMap<String, f64>,
    files: BTreeMap<String, OperatorMetadata>,
}

/// Write the model's matrices as CSV triplets plus a `model.json` manifest
/// into `dir`.
pub fn export_model(cfg: &RunConfig, dir: &Path) -> Result<Outcome, Failure> {
    let model = build_model(cfg.model()?)?;
    fs::create_dir_all(dir)
        .map_err(|e| Failure::Usage(format!("cannot create {}: {e}", dir.display())))?;
    let create = |name: &str| {
        let path = dir.join(name);
        File::create(&path)
            .map(BufWriter::new)
            .map_err(|e| Failure::Usage(format!("cannot write {}: {e}", path.display())))
    };
    let mut files = BTreeMap::new();
    match model.problem() {
        Ok(problem) => {
            for (name, op) in [("D.csv", problem.d()), ("H.csv", problem.h())] {
                op.write_csv(create(name)?)?;
                files.insert(name.to_string(), op.metadata());
            }
        }
        Err(_) => {
            let (class, _) = model
                .relative_class()
                .ok_or_else(|| Failure::Usage("model has nothing to export".into()))?;
            for (name, m) in [
                ("reference.csv", &class.reference),
                ("variant.csv", &class.variant),
            ] {
                localizer_core::operator::write_matrix_csv(create(name)?, m)?;
                files.insert(
                    name.to_string(),
                    OperatorMetadata {
                        n_plus: m.nrows(),
                        n_minus: 0,
                        parity: localizer_core::Parity::Even,
                        hermitian: true,
                    },
                );
            }
        }
    }
    let manifest = ModelManifest {
        model: model.descriptor(),
        parameters: model.parameters.clone(),
        reports: model.reports.clone(),
        files,
    };
    let text = to_json(&manifest)?;
    fs::write(dir.join("model.json"), &text).map_err(|e| Failure::Usage(e.to_string()))?;
    Ok(Outcome {
        output: text,
        code: 0,
        message: None,
    })
}
