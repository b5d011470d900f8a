//! `localizer-lab`: compute spectral localizer indices, sweep `(κ, ρ)` grids
//! and run the verification suites.
//!
//! Exit status: 0 success, 1 verification failure, 2 usage or configuration
//! error, 3 index disagreement.

mod commands;
mod config;

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use localizer_core::verify::Suite;
use localizer_core::Error;

use crate::commands::Outcome;
use crate::config::{Format, RunConfig};

pub const THREADS_ENV: &str = "LOCALIZER_LAB_THREADS";

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Verification(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Verification(_) => 1,
            Failure::Usage(_) => 2,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Usage(m) | Failure::Verification(m) => f.write_str(m),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InternalConsistency(_) | Error::ClassInconsistency { .. } | Error::Linalg(_) => {
                Failure::Verification(e.to_string())
            }
            _ => Failure::Usage(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "localizer-lab",
    version,
    about = "Spectral localizer index computations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args, Default)]
struct CommonArgs {
    /// Flat JSON config; flags override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Model descriptor, e.g. `qwz:L=16,m=1`.
    #[arg(long)]
    model: Option<String>,
    /// Choose an admissible (κ, ρ) automatically.
    #[arg(long)]
    auto: bool,
    #[arg(long)]
    kappa: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    /// Safety factor on the minimal admissible ρ for `--auto`.
    #[arg(long)]
    margin: Option<f64>,
    #[arg(long)]
    smoothing_width: Option<f64>,
    #[arg(long)]
    tau_sig: Option<f64>,
    #[arg(long)]
    tau_rank: Option<f64>,
    #[arg(long)]
    eps_eig: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output file (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

impl CommonArgs {
    fn flags(&self) -> RunConfig {
        RunConfig {
            model: self.model.clone(),
            kappa: self.kappa,
            rho: self.rho,
            auto: self.auto.then_some(true),
            margin: self.margin,
            smoothing_width: self.smoothing_width,
            tau_sig: self.tau_sig,
            tau_rank: self.tau_rank,
            eps_eig: self.eps_eig,
            seed: self.seed,
            out: self.out.clone(),
            format: self.format,
            ..Default::default()
        }
    }

    fn resolve(&self, extra: RunConfig) -> Result<RunConfig, Failure> {
        let base = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        let cfg = base.overlay(&self.flags()).overlay(&extra);
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Localizer index of a model next to its oracle indices.
    Compute {
        #[command(flatten)]
        common: CommonArgs,
        /// Evaluate at a fixed pair without requiring admissibility.
        #[arg(long)]
        uncertified: bool,
        /// Momentum grid for the Chern oracle.
        #[arg(long)]
        chern_grid: Option<usize>,
    },
    /// Localizer signature over a (κ, ρ) grid.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_delimiter = ',')]
        kappas: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        rhos: Option<Vec<f64>>,
    },
    /// Run a verification suite: bounds, identities, homotopy or all.
    Verify {
        #[arg(default_value = "all")]
        suite: String,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Tabulate the localizing function, or report its Fourier weight with
    /// `--format json`.
    ExportPhi {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, default_value_t = 1e-3)]
        step: f64,
    },
    /// Write a model's matrices and manifest into the `--out` directory.
    ExportModel {
        #[command(flatten)]
        common: CommonArgs,
    },
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| {
            Failure::Usage(format!(
                "{THREADS_ENV} must be a positive integer, got {value:?}"
            ))
        })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Failure::Usage(format!("cannot size the worker pool: {e}")))
}

fn emit(cfg: &RunConfig, outcome: &Outcome) -> Result<(), Failure> {
    match &cfg.out {
        Some(path) => fs::write(path, &outcome.output)
            .map_err(|e| Failure::Usage(format!("cannot write {}: {e}", path.display())))?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(outcome.output.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| Failure::Usage(e.to_string()))?;
        }
    }
    if let Some(m) = &outcome.message {
        eprintln!("{m}");
    }
    Ok(())
}

fn run(cli: Cli) -> Result<u8, Failure> {
    configure_threads()?;
    let outcome = match cli.command {
        Command::Compute {
            common,
            uncertified,
            chern_grid,
        } => {
            let cfg = common.resolve(RunConfig {
                uncertified: uncertified.then_some(true),
                chern_grid,
                ..Default::default()
            })?;
            let outcome = commands::compute(&cfg)?;
            emit(&cfg, &outcome)?;
            outcome
        }
        Command::Sweep {
            common,
            kappas,
            rhos,
        } => {
            let cfg = common.resolve(RunConfig {
                kappas,
                rhos,
                ..Default::default()
            })?;
            let outcome = commands::sweep_grid(&cfg)?;
            emit(&cfg, &outcome)?;
            outcome
        }
        Command::Verify { suite, common } => {
            let suite: Suite = suite.parse()?;
            let cfg = common.resolve(RunConfig::default())?;
            let (outcome, lines) = commands::verify(&cfg, suite)?;
            print!("{lines}");
            if cfg.out.is_some() {
                emit(&cfg, &outcome)?;
            } else if let Some(m) = &outcome.message {
                eprintln!("{m}");
            }
            outcome
        }
        Command::ExportPhi { common, step } => {
            let cfg = common.resolve(RunConfig::default())?;
            let format = cfg.format.or(Some(Format::Csv));
            let cfg = RunConfig { format, ..cfg };
            let outcome = commands::export_phi(&cfg, step)?;
            emit(&cfg, &outcome)?;
            outcome
        }
        Command::ExportModel { common } => {
            let cfg = common.resolve(RunConfig::default())?;
            let dir = cfg
                .out
                .clone()
                .ok_or_else(|| Failure::Usage("export-model needs --out DIR".into()))?;
            let outcome = commands::export_model(&cfg, &dir)?;
            outcome
        }
    };
    Ok(outcome.code as u8)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(failure) => {
            eprintln!("error: {failure}");
            if matches!(failure, Failure::Usage(_)) {
                eprintln!("run `localizer-lab --help` for usage");
            }
            ExitCode::from(failure.code())
        }
    }
}
