//! Localizing functions: even cutoffs `φ` with `φ = 1` on `[−1/2, 1/2]`,
//! support in `[−1, 1]`, monotone on `[0, ∞)`, and integrable `p·φ̂(p)`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt;
use std::io::Write;
use std::sync::{Arc, Mutex, OnceLock};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{even_intervals, simpson, GaussLegendre};

/// Quadrature steps for the Fourier weight.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureSettings {
    pub x_step: f64,
    pub p_step: f64,
    pub p_max: f64,
}

impl Default for QuadratureSettings {
    fn default() -> Self {
        Self {
            x_step: 1e-3,
            p_step: 1e-2,
            p_max: 200.0,
        }
    }
}

impl QuadratureSettings {
    fn validate(&self) -> Result<()> {
        if !(self.x_step > 0.0 && self.p_step > 0.0 && self.p_max > 0.0) {
            return Err(Error::Parameter(format!(
                "quadrature steps and p_max must be positive, got {self:?}"
            )));
        }
        Ok(())
    }

    fn halved(&self) -> Self {
        Self {
            x_step: self.x_step / 2.0,
            p_step: self.p_step / 2.0,
            p_max: self.p_max,
        }
    }
}

/// Relative change under step halving above which the weight is rejected.
pub const RESOLUTION_LIMIT: f64 = 0.01;

/// Growth of the weight between `p_max` and `2·p_max` above which `φ` is
/// flagged as not smooth enough for the tail to be negligible.
pub const SMOOTHNESS_LIMIT: f64 = 1e-3;

/// Result of the Fourier-weight quadrature.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FourierWeight {
    /// `∫_{−p_max}^{p_max} |p·φ̂(p)| dp`.
    pub weight: f64,
    /// `2·weight/√(2π)`.
    pub c_phi: f64,
    /// Bound on the mass of `|p·φ̂(p)|` beyond `p_max`.
    pub tail_bound: f64,
    /// Weight recomputed with both steps halved.
    pub refined_weight: f64,
    pub relative_change: f64,
    /// Largest `|Im φ̂(p)|` seen on a coarse check grid.
    pub max_imaginary: f64,
    pub settings: QuadratureSettings,
}

impl FourierWeight {
    /// `2·(weight + tail_bound)/√(2π)`, an upper bound for the true constant.
    pub fn c_phi_upper(&self) -> f64 {
        2.0 * (self.weight + self.tail_bound) / (2.0 * PI).sqrt()
    }
}

type Evaluator = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// An even function evaluated through `|x|`, so `φ(x) = φ(−x)` bit-exactly.
#[derive(Clone)]
pub struct LocalizingFunction {
    name: String,
    evaluator: Evaluator,
    support_radius: f64,
    settings: QuadratureSettings,
    fourier: Arc<OnceLock<Result<FourierWeight>>>,
}

impl fmt::Debug for LocalizingFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LocalizingFunction")
            .field("name", &self.name)
            .field("support_radius", &self.support_radius)
            .finish()
    }
}

impl LocalizingFunction {
    /// Wrap `profile`, evaluated on `|x|` and assumed to vanish beyond
    /// `support_radius`.
    pub fn custom(
        name: impl Into<String>,
        support_radius: f64,
        profile: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        if !(support_radius > 0.0 && support_radius.is_finite()) {
            return Err(Error::Parameter("support radius must be positive".into()));
        }
        Ok(Self {
            name: name.into(),
            evaluator: Arc::new(profile),
            support_radius,
            settings: QuadratureSettings::default(),
            fourier: Arc::new(OnceLock::new()),
        })
    }

    /// Same function with different quadrature settings (cache reset).
    pub fn with_quadrature(&self, settings: QuadratureSettings) -> Result<Self> {
        settings.validate()?;
        Ok(Self {
            settings,
            fourier: Arc::new(OnceLock::new()),
            ..self.clone()
        })
    }

    /// `φ_ρ(x) = φ(x/ρ)`.
    pub fn scaled(&self, rho: f64) -> Result<Self> {
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(Error::Parameter(format!(
                "scale must be positive, got {rho}"
            )));
        }
        let inner = self.evaluator.clone();
        let mut out = Self::custom(
            format!("{}(x/{rho})", self.name),
            self.support_radius * rho,
            move |x| inner(x / rho),
        )?;
        out.settings = self.settings;
        Ok(out)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn support_radius(&self) -> f64 {
        self.support_radius
    }

    pub fn settings(&self) -> QuadratureSettings {
        self.settings
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        let a = x.abs();
        if a >= self.support_radius {
            0.0
        } else {
            (self.evaluator)(a)
        }
    }

    /// Cached Fourier weight at the configured settings.
    pub fn fourier(&self) -> Result<&FourierWeight> {
        self.fourier
            .get_or_init(|| fourier_weight(self, self.settings))
            .as_ref()
            .map_err(Clone::clone)
    }

    pub fn weight(&self) -> Result<f64> {
        Ok(self.fourier()?.weight)
    }

    pub fn c_phi(&self) -> Result<f64> {
        Ok(self.fourier()?.c_phi)
    }

    /// `g(x) = (1 − φ(x)⁴)^{1/2}·sign(x)`.
    pub fn complement(&self, x: f64) -> f64 {
        let p = self.eval(x);
        let g = (1.0 - p.powi(4)).max(0.0).sqrt();
        if x > 0.0 {
            g
        } else if x < 0.0 {
            -g
        } else {
            0.0
        }
    }

    /// Two-column CSV `x,phi(x)` on `[−R, R]`.
    pub fn write_csv<W: Write>(&self, writer: W, step: f64) -> Result<()> {
        if !(step > 0.0) {
            return Err(Error::Parameter("export step must be positive".into()));
        }
        let mut out = csv::Writer::from_writer(writer);
        out.write_record(["x", "phi(x)"])
            .map_err(|e| Error::Parse(e.to_string()))?;
        let n = (self.support_radius / step).round() as i64;
        for i in -n..=n {
            let x = i as f64 * step;
            out.write_record([x.to_string(), self.eval(x).to_string()])
                .map_err(|e| Error::Parse(e.to_string()))?;
        }
        out.flush().map_err(|e| Error::Parse(e.to_string()))
    }
}

/// Normalized smooth step built from the bump `exp(−1/(1 − t²))`:
/// `1` for `t ≤ −1`, `0` for `t ≥ 1`, strictly decreasing in between.
#[derive(Clone, Debug)]
struct BumpStep {
    rule: GaussLegendre,
    normalization: f64,
}

fn bump(s: f64) -> f64 {
    let q = 1.0 - s * s;
    if q <= 0.0 {
        0.0
    } else {
        (-1.0 / q).exp()
    }
}

impl BumpStep {
    fn new() -> Self {
        let rule = GaussLegendre::new(96);
        let normalization = 2.0 * rule.integrate(bump, 0.0, 1.0);
        Self {
            rule,
            normalization,
        }
    }

    fn eval(&self, t: f64) -> f64 {
        if t <= -1.0 {
            1.0
        } else if t >= 1.0 {
            0.0
        } else if t >= 0.0 {
            self.rule.integrate(bump, t, 1.0) / self.normalization
        } else {
            1.0 - self.rule.integrate(bump, -1.0, t) / self.normalization
        }
    }
}

/// The indicator of `[−3/4, 3/4]` smoothed by a bump of half-width `w`.
///
/// Equal to `1` on `|x| ≤ 3/4 − w` and `0` on `|x| ≥ 3/4 + w`, so
/// `0 < w ≤ 1/4` keeps the plateau and support conditions exact.
pub fn default_localizer(smoothing_width: f64) -> Result<LocalizingFunction> {
    default_localizer_with(smoothing_width, QuadratureSettings::default())
}

/// As [`default_localizer`] with explicit quadrature settings. Constructions
/// are memoized per process, so repeated calls share one Fourier computation.
pub fn default_localizer_with(
    smoothing_width: f64,
    settings: QuadratureSettings,
) -> Result<LocalizingFunction> {
    type Key = (u64, u64, u64, u64);
    static CACHE: OnceLock<Mutex<HashMap<Key, LocalizingFunction>>> = OnceLock::new();
    let key = (
        smoothing_width.to_bits(),
        settings.x_step.to_bits(),
        settings.p_step.to_bits(),
        settings.p_max.to_bits(),
    );
    let cache = CACHE.get_or_init(Default::default);
    if let Some(phi) = cache.lock().map_err(poisoned)?.get(&key) {
        return Ok(phi.clone());
    }
    let phi = build_default(smoothing_width, settings)?;
    cache.lock().map_err(poisoned)?.insert(key, phi.clone());
    Ok(phi)
}

fn poisoned<T>(_: T) -> Error {
    Error::InternalConsistency("localizer cache lock poisoned".into())
}

fn build_default(smoothing_width: f64, settings: QuadratureSettings) -> Result<LocalizingFunction> {
    let w = smoothing_width;
    if !(w > 0.0 && w <= 0.25) {
        return Err(Error::Parameter(format!(
            "smoothing width must lie in (0, 1/4], got {w}"
        )));
    }
    let step = BumpStep::new();
    let phi = LocalizingFunction::custom(format!("bump-step(w={w})"), 1.0, move |a| {
        if a <= 0.75 - w {
            1.0
        } else {
            step.eval((a - 0.75) / w)
        }
    })?
    .with_quadrature(settings)?;
    phi.fourier()?;
    Ok(phi)
}

/// Outcome of [`validate_localizing`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    /// `φ = 1` on `[−1/2, 1/2]`.
    pub plateau: bool,
    /// `φ = 0` for `|x| > 1`.
    pub support: bool,
    /// Non-increasing on `[0, ∞)`.
    pub monotone: bool,
    pub even: bool,
    pub range: bool,
    /// Weight grows by less than [`SMOOTHNESS_LIMIT`] from `p_max` to `2·p_max`.
    pub smooth: bool,
    pub weight_growth: f64,
    pub passed: bool,
}

/// Check the defining conditions of a localizing function on a grid over
/// `[−2, 2]`, plus the quadrature smoothness diagnostic.
pub fn validate_localizing(phi: &LocalizingFunction, grid_step: f64) -> Result<ValidationReport> {
    if !(grid_step > 0.0) {
        return Err(Error::Parameter("grid step must be positive".into()));
    }
    let n = (2.0 / grid_step).floor() as i64;
    let mut plateau = true;
    let mut support = true;
    let mut even = true;
    let mut range = true;
    let mut monotone = true;
    let mut previous = f64::INFINITY;
    for i in 0..=n {
        let x = i as f64 * grid_step;
        let v = phi.eval(x);
        let m = phi.eval(-x);
        even &= v.to_bits() == m.to_bits();
        range &= (0.0..=1.0).contains(&v) && (0.0..=1.0).contains(&m);
        if x <= 0.5 {
            plateau &= v == 1.0 && m == 1.0;
        }
        if x > 1.0 {
            support &= v == 0.0 && m == 0.0;
        }
        monotone &= v <= previous;
        previous = v;
    }

    let base = phi.settings();
    let wide = QuadratureSettings {
        p_max: 2.0 * base.p_max,
        ..base
    };
    let near = weight_only(phi, base);
    let far = weight_only(phi, wide);
    let weight_growth = (far - near).abs() / near.abs().max(f64::MIN_POSITIVE);
    let smooth = weight_growth < SMOOTHNESS_LIMIT;
    let passed = plateau && support && monotone && even && range;
    Ok(ValidationReport {
        plateau,
        support,
        monotone,
        even,
        range,
        smooth,
        weight_growth,
        passed,
    })
}

/// Samples of `φ` on `[0, R]` with `2N` Simpson intervals.
fn samples(phi: &LocalizingFunction, x_step: f64) -> (Vec<f64>, f64) {
    let r = phi.support_radius();
    let n = even_intervals(r, x_step);
    let h = r / n as f64;
    ((0..=n).map(|i| phi.eval(i as f64 * h)).collect(), h)
}

/// `φ̂(p) = (2/√(2π)) ∫_0^R φ(x) cos(px) dx` for each `p`, with cosines
/// generated by a re-seeded rotation recurrence.
fn transform(values: &[f64], h: f64, momenta: &[f64]) -> Vec<f64> {
    const RESEED: usize = 256;
    let scale = 2.0 / (2.0 * PI).sqrt();
    momenta
        .par_iter()
        .map(|&p| {
            let (s1, c1) = (p * h).sin_cos();
            let mut weighted = Vec::with_capacity(values.len());
            let (mut c, mut s) = (1.0_f64, 0.0_f64);
            for (j, &v) in values.iter().enumerate() {
                if j % RESEED == 0 {
                    let (sj, cj) = (p * h * j as f64).sin_cos();
                    c = cj;
                    s = sj;
                }
                weighted.push(v * c);
                let next_c = c * c1 - s * s1;
                s = s * c1 + c * s1;
                c = next_c;
            }
            scale * simpson(&weighted, h)
        })
        .collect()
}

fn weight_only(phi: &LocalizingFunction, settings: QuadratureSettings) -> f64 {
    let (values, h) = samples(phi, settings.x_step);
    let m = even_intervals(settings.p_max, settings.p_step);
    let hp = settings.p_max / m as f64;
    let momenta: Vec<f64> = (0..=m).map(|i| i as f64 * hp).collect();
    let hat = transform(&values, h, &momenta);
    let integrand: Vec<f64> = momenta
        .iter()
        .zip(&hat)
        .map(|(p, f)| (p * f).abs())
        .collect();
    2.0 * simpson(&integrand, hp)
}

/// `‖p·φ̂(p)‖₁` truncated to `|p| ≤ p_max`, with a step-halving convergence
/// check and an integration-by-parts bound on the neglected tail.
pub fn fourier_weight(
    phi: &LocalizingFunction,
    settings: QuadratureSettings,
) -> Result<FourierWeight> {
    settings.validate()?;
    let weight = weight_only(phi, settings);
    let refined_weight = weight_only(phi, settings.halved());
    let relative_change =
        (refined_weight - weight).abs() / refined_weight.abs().max(f64::MIN_POSITIVE);
    if relative_change > RESOLUTION_LIMIT {
        return Err(Error::Resolution {
            coarse: weight,
            refined: refined_weight,
            relative_change,
        });
    }
    Ok(FourierWeight {
        weight,
        c_phi: 2.0 * weight / (2.0 * PI).sqrt(),
        tail_bound: tail_bound(phi, settings),
        refined_weight,
        relative_change,
        max_imaginary: max_imaginary(phi, settings),
        settings,
    })
}

/// `|φ̂(p)| ≤ M_k/|p|^k` with `M_k = ‖φ^{(k)}‖₁/√(2π)` gives
/// `∫_{|p|>P} |p·φ̂(p)| dp ≤ 2·M_k/((k−2)·P^{k−2})`; minimized over `k = 3..6`.
/// Derivative norms come from central differences on a grid of step `2·x_step`.
fn tail_bound(phi: &LocalizingFunction, settings: QuadratureSettings) -> f64 {
    let r = phi.support_radius();
    let h = 2.0 * settings.x_step * r.max(1.0);
    let pad = 4;
    let n = (r / h).ceil() as i64 + pad;
    let grid: Vec<f64> = (-n..=n).map(|i| phi.eval(i as f64 * h)).collect();
    let mut derivative = grid;
    let mut best = f64::INFINITY;
    for k in 1..=6 {
        derivative = derivative
            .windows(3)
            .map(|w| (w[2] - w[0]) / (2.0 * h))
            .collect();
        if k >= 3 {
            let l1: f64 = derivative.iter().map(|v| v.abs()).sum::<f64>() * h;
            let m_k = l1 / (2.0 * PI).sqrt();
            let bound = 2.0 * m_k / ((k as f64 - 2.0) * settings.p_max.powi(k - 2));
            best = best.min(bound);
        }
    }
    best
}

/// `max |Im φ̂(p)|` over a coarse momentum grid, from the full symmetric
/// sine integral.
fn max_imaginary(phi: &LocalizingFunction, settings: QuadratureSettings) -> f64 {
    let r = phi.support_radius();
    let n = even_intervals(r, settings.x_step);
    let h = r / n as f64;
    let xs: Vec<f64> = (-(n as i64)..=n as i64).map(|i| i as f64 * h).collect();
    let values: Vec<f64> = xs.iter().map(|&x| phi.eval(x)).collect();
    (0..=64)
        .map(|i| settings.p_max * i as f64 / 64.0)
        .map(|p| {
            let integrand: Vec<f64> = xs
                .iter()
                .zip(&values)
                .map(|(&x, &v)| v * (p * x).sin())
                .collect();
            (simpson(&integrand, h) / (2.0 * PI).sqrt()).abs()
        })
        .fold(0.0, f64::max)
}
