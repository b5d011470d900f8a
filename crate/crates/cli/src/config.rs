use std::fs;
use std::path::{Path, PathBuf};

use localizer_core::ktheory::{ParamSelection, TAU_SIG};
use localizer_core::localizer::DEFAULT_MARGIN;
use localizer_core::oracle::TAU_RANK;
use localizer_core::QuadratureSettings;
use serde::{Deserialize, Serialize};

use crate::Failure;

pub const DEFAULT_SMOOTHING_WIDTH: f64 = 0.25;
pub const DEFAULT_CHERN_GRID: usize = 48;
pub const DEFAULT_EPS_EIG: f64 = 1e-10;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

/// Flat run configuration. Every key is optional in a file; flags given on
/// the command line replace the file's value.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: Option<String>,
    pub kappa: Option<f64>,
    pub rho: Option<f64>,
    pub auto: Option<bool>,
    pub margin: Option<f64>,
    pub uncertified: Option<bool>,
    pub smoothing_width: Option<f64>,
    pub x_step: Option<f64>,
    pub p_step: Option<f64>,
    pub p_max: Option<f64>,
    pub tau_sig: Option<f64>,
    pub tau_rank: Option<f64>,
    pub eps_eig: Option<f64>,
    pub chern_grid: Option<usize>,
    pub kappas: Option<Vec<f64>>,
    pub rhos: Option<Vec<f64>>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
}

macro_rules! overlay {
    ($base:expr, $top:expr, $($field:ident),*) => {
        $( if $top.$field.is_some() { $base.$field = $top.$field.clone(); } )*
    };
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = fs::read_to_string(path)
            .map_err(|e| Failure::Usage(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| Failure::Usage(format!("invalid config {}: {e}", path.display())))
    }

    /// `self` with every key set in `flags` replaced.
    pub fn overlay(mut self, flags: &RunConfig) -> Self {
        overlay!(
            self,
            flags,
            model,
            kappa,
            rho,
            auto,
            margin,
            uncertified,
            smoothing_width,
            x_step,
            p_step,
            p_max,
            tau_sig,
            tau_rank,
            eps_eig,
            chern_grid,
            kappas,
            rhos,
            seed,
            out,
            format
        );
        self
    }

    pub fn validate(&self) -> Result<(), Failure> {
        let positive = [
            ("kappa", self.kappa),
            ("rho", self.rho),
            ("smoothing_width", self.smoothing_width),
            ("x_step", self.x_step),
            ("p_step", self.p_step),
            ("p_max", self.p_max),
            ("tau_sig", self.tau_sig),
            ("tau_rank", self.tau_rank),
            ("eps_eig", self.eps_eig),
        ];
        for (name, value) in positive {
            if let Some(v) = value {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(Failure::Usage(format!(
                        "{name} must be positive and finite, got {v}"
                    )));
                }
            }
        }
        if let Some(m) = self.margin {
            if !(m > 1.0 && m.is_finite()) {
                return Err(Failure::Usage(format!("margin must exceed 1, got {m}")));
            }
        }
        if self.chern_grid == Some(0) {
            return Err(Failure::Usage("chern_grid must be positive".into()));
        }
        Ok(())
    }

    pub fn model(&self) -> Result<&str, Failure> {
        self.model
            .as_deref()
            .ok_or_else(|| Failure::Usage("no model given; pass --model NAME:key=value,...".into()))
    }

    /// Exactly one of `kappa` + `rho` and `auto`.
    pub fn selection(&self) -> Result<ParamSelection, Failure> {
        let auto = self.auto.unwrap_or(false);
        match (auto, self.kappa, self.rho) {
            (true, None, None) => Ok(ParamSelection::Auto {
                margin: self.margin.unwrap_or(DEFAULT_MARGIN),
            }),
            (false, Some(kappa), Some(rho)) => Ok(ParamSelection::Fixed { kappa, rho }),
            (true, _, _) => Err(Failure::Usage(
                "--auto cannot be combined with --kappa/--rho".into(),
            )),
            (false, None, None) => Err(Failure::Usage(
                "pass either --auto or both --kappa and --rho".into(),
            )),
            (false, _, _) => Err(Failure::Usage(
                "--kappa and --rho must be given together".into(),
            )),
        }
    }

    pub fn quadrature(&self) -> QuadratureSettings {
        let d = QuadratureSettings::default();
        QuadratureSettings {
            x_step: self.x_step.unwrap_or(d.x_step),
            p_step: self.p_step.unwrap_or(d.p_step),
            p_max: self.p_max.unwrap_or(d.p_max),
        }
    }

    pub fn smoothing_width(&self) -> f64 {
        self.smoothing_width.unwrap_or(DEFAULT_SMOOTHING_WIDTH)
    }

    pub fn tau_sig(&self) -> f64 {
        self.tau_sig.unwrap_or(TAU_SIG)
    }

    pub fn tau_rank(&self) -> f64 {
        self.tau_rank.unwrap_or(TAU_RANK)
    }

    pub fn eps_eig(&self) -> f64 {
        self.eps_eig.unwrap_or(DEFAULT_EPS_EIG)
    }

    pub fn chern_grid(&self) -> usize {
        self.chern_grid.unwrap_or(DEFAULT_CHERN_GRID)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn format(&self) -> Format {
        self.format.unwrap_or_default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file_keys() {
        let file: RunConfig =
            serde_json::from_str(r#"{"model": "oscillator:n=10", "kappa": 1.0, "rho": 2.0}"#)
                .unwrap();
        let flags = RunConfig {
            rho: Some(3.0),
            ..Default::default()
        };
        let merged = file.overlay(&flags);
        assert_eq!(merged.model.as_deref(), Some("oscillator:n=10"));
        assert_eq!(merged.rho, Some(3.0));
        assert_eq!(merged.kappa, Some(1.0));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"modle": "x"}"#).is_err());
    }

    #[test]
    fn selection_needs_exactly_one_mode() {
        let mut c = RunConfig::default();
        assert!(c.selection().is_err());
        c.auto = Some(true);
        assert!(matches!(c.selection(), Ok(ParamSelection::Auto { .. })));
        c.kappa = Some(1.0);
        assert!(c.selection().is_err());
        c.auto = None;
        assert!(c.selection().is_err());
        c.rho = Some(1.0);
        assert!(matches!(c.selection(), Ok(ParamSelection::Fixed { .. })));
    }

    #[test]
    fn tolerances_must_be_positive() {
        let c = RunConfig {
            tau_sig: Some(0.0),
            ..Default::default()
        };
        assert!(c.validate().is_err());
    }
}
