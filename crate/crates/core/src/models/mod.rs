//! Test operators: the truncated oscillator Dirac operator, a Chern insulator
//! paired with the two-dimensional position Dirac operator, projections over
//! `M_k`, and random Lipschitz perturbations.
//!
//! Models are addressed by descriptor strings such as `qwz:L=16,m=1.0`.

mod oscillator;
mod qwz;
mod random;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use ndarray::ArrayView2;

use crate::error::{Error, Result};
use crate::ktheory::RelativeClass;
use crate::linalg::C64;
use crate::localizer::IndexProblem;
use crate::operator::GradedOperator;
use crate::oracle::BlochFamily;

pub use oscillator::{oscillator_dirac, oscillator_with_h};
pub use qwz::{qwz_chern_model, QwzBloch};
pub use random::{
    mk_block_example, mk_block_example_with, random_instance, random_lipschitz, RandomLipschitz,
};

/// Boundary weight above which an eigenvector counts as touching the edge of
/// the truncation.
pub const BOUNDARY_WEIGHT: f64 = 1e-6;

/// What a model generates.
#[derive(Clone)]
pub enum ModelPayload {
    /// An index pairing `(H, D)` with an optional Bloch family for the
    /// Chern oracle.
    Pairing {
        problem: IndexProblem,
        bloch: Option<Arc<dyn BlochFamily>>,
    },
    /// A half-signature class `(−1, 2p − 1)` over `M_k` with its known rank.
    Relative { class: RelativeClass, rank: usize },
}

#[derive(Clone)]
pub struct ModelDescriptor {
    pub name: String,
    pub parameters: BTreeMap<String, f64>,
    pub payload: ModelPayload,
    /// Quantities measured at generation (gap bound, `‖d(H)‖`, `ρ_max`, ...).
    pub reports: BTreeMap<String, f64>,
}

impl fmt::Debug for ModelDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ModelDescriptor")
            .field("name", &self.name)
            .field("parameters", &self.parameters)
            .field("reports", &self.reports)
            .finish_non_exhaustive()
    }
}

impl ModelDescriptor {
    pub fn problem(&self) -> Result<&IndexProblem> {
        match &self.payload {
            ModelPayload::Pairing { problem, .. } => Ok(problem),
            ModelPayload::Relative { .. } => Err(Error::Contract(format!(
                "model {} describes a relative class, not an index pairing",
                self.name
            ))),
        }
    }

    pub fn bloch(&self) -> Option<&dyn BlochFamily> {
        match &self.payload {
            ModelPayload::Pairing { bloch, .. } => bloch.as_deref(),
            ModelPayload::Relative { .. } => None,
        }
    }

    pub fn relative_class(&self) -> Option<(&RelativeClass, usize)> {
        match &self.payload {
            ModelPayload::Relative { class, rank } => Some((class, *rank)),
            ModelPayload::Pairing { .. } => None,
        }
    }

    /// Canonical descriptor string.
    pub fn descriptor(&self) -> String {
        ModelSpec {
            name: self.name.clone(),
            parameters: self.parameters.clone(),
        }
        .to_string()
    }
}

/// A parsed `name:key=value,...` descriptor.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelSpec {
    pub name: String,
    pub parameters: BTreeMap<String, f64>,
}

impl FromStr for ModelSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, rest) = match s.split_once(':') {
            Some((n, r)) => (n.trim(), r.trim()),
            None => (s.trim(), ""),
        };
        if name.is_empty() {
            return Err(Error::Parse(format!("empty model name in {s:?}")));
        }
        let mut parameters = BTreeMap::new();
        for item in rest.split(',').map(str::trim).filter(|i| !i.is_empty()) {
            let (key, value) = item
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("expected key=value, got {item:?}")))?;
            let value: f64 = value
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("parameter {key} is not a number: {value:?}")))?;
            if parameters.insert(key.trim().to_string(), value).is_some() {
                return Err(Error::Parse(format!("parameter {key} given twice")));
            }
        }
        Ok(Self {
            name: name.to_string(),
            parameters,
        })
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name)?;
        for (i, (k, v)) in self.parameters.iter().enumerate() {
            write!(f, "{}{k}={v}", if i == 0 { ':' } else { ',' })?;
        }
        Ok(())
    }
}

struct Params<'a> {
    spec: &'a ModelSpec,
    allowed: &'static [&'static str],
}

impl Params<'_> {
    fn check(&self) -> Result<()> {
        if let Some(k) = self
            .spec
            .parameters
            .keys()
            .find(|k| !self.allowed.contains(&k.as_str()))
        {
            return Err(Error::Parse(format!(
                "unknown parameter {k:?} for model {}; expected one of {:?}",
                self.spec.name, self.allowed
            )));
        }
        Ok(())
    }

    fn real(&self, key: &str) -> Option<f64> {
        self.spec.parameters.get(key).copied()
    }

    fn integer(&self, key: &str) -> Result<Option<usize>> {
        match self.real(key) {
            None => Ok(None),
            Some(v) if v >= 0.0 && v.fract() == 0.0 && v < 1e9 => Ok(Some(v as usize)),
            Some(v) => Err(Error::Parse(format!(
                "parameter {key} must be a non-negative integer, got {v}"
            ))),
        }
    }

    fn required_integer(&self, key: &str) -> Result<usize> {
        self.integer(key)?.ok_or_else(|| {
            Error::Parse(format!("model {} requires parameter {key}", self.spec.name))
        })
    }

    fn required_real(&self, key: &str) -> Result<f64> {
        self.real(key).ok_or_else(|| {
            Error::Parse(format!("model {} requires parameter {key}", self.spec.name))
        })
    }
}

/// Model names accepted by [`build_model`].
pub const MODEL_NAMES: &[&str] = &["oscillator", "qwz", "mk", "random"];

/// Build a model from its descriptor.
///
/// - `oscillator:n=N[,strength=S,seed=K]`: `H = 1`, or a random Lipschitz `H`
///   when `strength` is given.
/// - `qwz:L=L,m=M`
/// - `mk:k=K,seed=S[,n=N,rank=R]`
/// - `random:n_plus=A,n_minus=B,seed=S[,strength=X]`
pub fn build_model(descriptor: &str) -> Result<ModelDescriptor> {
    let spec: ModelSpec = descriptor.parse()?;
    build_from_spec(&spec)
}

pub fn build_from_spec(spec: &ModelSpec) -> Result<ModelDescriptor> {
    match spec.name.as_str() {
        "oscillator" => {
            let p = Params {
                spec,
                allowed: &["n", "strength", "seed"],
            };
            p.check()?;
            let n = p.required_integer("n")?;
            match p.real("strength") {
                None => oscillator_dirac(n),
                Some(strength) => {
                    let seed = p.integer("seed")?.unwrap_or(0) as u64;
                    let mut model = oscillator_dirac(n)?;
                    let d = model.problem()?.d().clone();
                    let generated = random_lipschitz(&d, strength, seed)?;
                    model = oscillator_with_h(n, generated.h)?;
                    model.parameters.insert("strength".into(), strength);
                    model.parameters.insert("seed".into(), seed as f64);
                    model.reports.insert("dH_norm".into(), generated.dh_norm);
                    Ok(model)
                }
            }
        }
        "qwz" => {
            let p = Params {
                spec,
                allowed: &["L", "m"],
            };
            p.check()?;
            qwz_chern_model(p.required_integer("L")?, p.required_real("m")?)
        }
        "mk" => {
            let p = Params {
                spec,
                allowed: &["k", "seed", "n", "rank"],
            };
            p.check()?;
            let k = p.required_integer("k")?;
            let seed = p.integer("seed")?.unwrap_or(0) as u64;
            match (p.integer("n")?, p.integer("rank")?) {
                (None, None) => mk_block_example(k, seed),
                (n, rank) => {
                    let n = n.unwrap_or(1);
                    mk_block_example_with(k, n, rank.unwrap_or(0), seed)
                }
            }
        }
        "random" => {
            let p = Params {
                spec,
                allowed: &["n_plus", "n_minus", "seed", "strength"],
            };
            p.check()?;
            random_instance(
                p.required_integer("n_plus")?,
                p.required_integer("n_minus")?,
                p.real("strength").unwrap_or(random::DEFAULT_STRENGTH),
                p.integer("seed")?.unwrap_or(0) as u64,
            )
        }
        other => Err(Error::Parse(format!(
            "unknown model {other:?}; expected one of {MODEL_NAMES:?}"
        ))),
    }
}

/// Number of eigenvectors of `D` with `|λ| ≤ radius` whose weight on the
/// `boundary` coordinates is at least [`BOUNDARY_WEIGHT`].
pub fn boundary_contamination(
    d: &GradedOperator,
    boundary: &[usize],
    radius: f64,
) -> Result<usize> {
    let spectrum = d.spectrum()?;
    let vectors: ArrayView2<C64> = spectrum.eigenvectors().view();
    Ok(spectrum
        .select(|l| l.abs() <= radius)
        .into_iter()
        .filter(|&j| {
            boundary
                .iter()
                .map(|&i| vectors[[i, j]].norm_sqr())
                .sum::<f64>()
                >= BOUNDARY_WEIGHT
        })
        .count())
}

fn guard(d: &GradedOperator, boundary: &[usize], rho_max: f64) -> Result<()> {
    let contaminated = boundary_contamination(d, boundary, 2.0 * rho_max)?;
    if contaminated > 0 {
        return Err(Error::Generation(format!(
            "{contaminated} eigenvectors with |λ| <= {} touch the truncation boundary",
            2.0 * rho_max
        )));
    }
    Ok(())
}
