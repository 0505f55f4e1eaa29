//! Physical parameters, the exponential change of variables, evaluatable
//! function descriptors and scenario configuration.
//!
//! All inputs are expected in one coherent unit system; nothing here checks
//! dimensions.

use std::f64::consts::FRAC_PI_2;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::eigen::BoundaryKind;
use crate::error::{Error, Result};
use crate::exit::{ExitTrace, Provenance};
use crate::oracle::OracleKind;
use crate::series::SolveMode;
use crate::spline::CubicSpline;

/// Constant coefficients of `R C_t = D C_xx - v C_x - mu C + gamma` on `0 < x < ell`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicalParams {
    #[serde(rename = "R", alias = "retardation")]
    pub retardation: f64,
    #[serde(rename = "D", alias = "diffusion")]
    pub diffusion: f64,
    #[serde(rename = "v", alias = "velocity")]
    pub velocity: f64,
    #[serde(rename = "mu", alias = "decay", default)]
    pub decay: f64,
    #[serde(rename = "gamma", alias = "production", default)]
    pub production: f64,
    #[serde(rename = "ell", alias = "length")]
    pub length: f64,
    #[serde(default)]
    pub t0: f64,
}

impl PhysicalParams {
    pub fn validate(&self) -> Result<()> {
        let named = [
            ("R", self.retardation),
            ("D", self.diffusion),
            ("v", self.velocity),
            ("mu", self.decay),
            ("gamma", self.production),
            ("ell", self.length),
            ("t0", self.t0),
        ];
        for (name, value) in named {
            if !value.is_finite() {
                return Err(Error::NonFiniteParam(name.into()));
            }
        }
        for (name, value) in &named[..] {
            match *name {
                "R" | "D" | "v" | "ell" if *value <= 0.0 => {
                    return Err(Error::NonPositiveParam((*name).into()))
                }
                "mu" | "gamma" if *value < 0.0 => return Err(Error::NegativeParam((*name).into())),
                _ => {}
            }
        }
        if self.production > 0.0 && self.decay == 0.0 {
            return Err(Error::GammaWithoutDecay);
        }
        Ok(())
    }

    /// Diffusivity of the canonical heat equation, `D/R`.
    pub fn diffusivity(&self) -> f64 {
        self.diffusion / self.retardation
    }

    /// The constant `gamma/mu` that balances decay against production;
    /// zero when there is no production.
    pub fn equilibrium(&self) -> f64 {
        if self.production == 0.0 {
            0.0
        } else {
            self.production / self.decay
        }
    }

    /// Decay rate `mu/R` of the physical concentration carried by the
    /// negative Robin mode.
    pub fn mode_zero_rate(&self) -> f64 {
        self.decay / self.retardation
    }

    pub fn peclet(&self) -> f64 {
        self.velocity * self.length / self.diffusion
    }
}

/// Parameters of `C = (w + e^{st} H) e^{rx - st}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransformParams {
    pub r: f64,
    pub s: f64,
}

pub fn derive_transform(p: &PhysicalParams) -> TransformParams {
    let r = p.velocity / (2.0 * p.diffusion);
    let s = (p.velocity * p.velocity / (4.0 * p.diffusion) + p.decay) / p.retardation;
    TransformParams { r, s }
}

/// A differentiable scalar function of one variable (time for the inlet,
/// space for the initial profile).
#[derive(Debug, Clone, PartialEq)]
pub enum ScalarFn {
    Constant {
        value: f64,
    },
    /// `base + amplitude` on `[start, end]`, with quintic smoothstep edges
    /// of width `ramp` so the function stays twice differentiable.
    StepPulse {
        base: f64,
        amplitude: f64,
        start: f64,
        end: f64,
        ramp: f64,
    },
    /// `offset + amplitude * sin(omega * x + phase)`
    Sinusoid {
        offset: f64,
        amplitude: f64,
        omega: f64,
        phase: f64,
    },
    /// `offset + amplitude * exp(-rate * (x - origin))`
    ExponentialDecay {
        offset: f64,
        amplitude: f64,
        rate: f64,
        origin: f64,
    },
    /// Clamped cubic spline (zero end slopes) with constant hold outside.
    Tabulated(CubicSpline),
}

/// Lower limit of an exponentially weighted time integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Lower {
    From(f64),
    NegInfinity,
}

impl ScalarFn {
    pub fn constant(value: f64) -> Self {
        ScalarFn::Constant { value }
    }

    pub fn tabulated(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        Ok(ScalarFn::Tabulated(CubicSpline::clamped(x, y, 0.0, 0.0)?))
    }

    pub fn value(&self, x: f64) -> f64 {
        self.eval(x, 0)
    }

    pub fn slope(&self, x: f64) -> f64 {
        self.eval(x, 1)
    }

    /// Value (`order = 0`) or derivative of order 1 or 2 at `x`.
    pub fn eval(&self, x: f64, order: u8) -> f64 {
        match *self {
            ScalarFn::Constant { value } => {
                if order == 0 {
                    value
                } else {
                    0.0
                }
            }
            ScalarFn::StepPulse {
                base,
                amplitude,
                start,
                end,
                ramp,
            } => {
                let up = (x - start) / ramp;
                let down = (x - end) / ramp;
                let edge = smoothstep(up, order) - smoothstep(down, order);
                let value = amplitude * edge / ramp.powi(order as i32);
                if order == 0 {
                    base + value
                } else {
                    value
                }
            }
            ScalarFn::Sinusoid {
                offset,
                amplitude,
                omega,
                phase,
            } => {
                let arg = omega * x + phase;
                match order {
                    0 => offset + amplitude * arg.sin(),
                    1 => amplitude * omega * arg.cos(),
                    _ => -amplitude * omega * omega * arg.sin(),
                }
            }
            ScalarFn::ExponentialDecay {
                offset,
                amplitude,
                rate,
                origin,
            } => {
                let e = amplitude * (-rate * (x - origin)).exp();
                match order {
                    0 => offset + e,
                    1 => -rate * e,
                    _ => rate * rate * e,
                }
            }
            ScalarFn::Tabulated(ref spline) => spline.eval(x, order),
        }
    }

    pub fn is_constant(&self) -> bool {
        match *self {
            ScalarFn::Constant { .. } => true,
            ScalarFn::StepPulse { amplitude, .. } => amplitude == 0.0,
            ScalarFn::Sinusoid { amplitude, omega, .. } => amplitude == 0.0 || omega == 0.0,
            ScalarFn::ExponentialDecay { amplitude, rate, .. } => amplitude == 0.0 || rate == 0.0,
            ScalarFn::Tabulated(ref s) => s.values().windows(2).all(|w| w[0] == w[1]),
        }
    }

    /// Closed form of `∫ e^{kappa (tau - t)} f^{(order)}(tau) dtau` over
    /// `[lower, t]`, when one exists for this kind. `None` means the caller
    /// must integrate numerically.
    pub fn exp_weighted_integral(&self, order: u8, kappa: f64, lower: Lower, t: f64) -> Option<Result<f64>> {
        if self.is_constant() {
            let c = if order == 0 { self.value(t) } else { 0.0 };
            return Some(constant_weighted(c, kappa, lower, t));
        }
        match *self {
            ScalarFn::Sinusoid {
                offset,
                amplitude,
                omega,
                phase,
            } => Some(match order {
                0 => constant_weighted(offset, kappa, lower, t)
                    .and_then(|c| Ok(c + sine_weighted(amplitude, omega, phase, kappa, lower, t)?)),
                _ => sine_weighted(amplitude * omega, omega, phase + FRAC_PI_2, kappa, lower, t),
            }),
            ScalarFn::ExponentialDecay {
                offset,
                amplitude,
                rate,
                origin,
            } => {
                if lower == Lower::NegInfinity {
                    // grows without bound backward in time
                    return Some(Err(Error::UnboundedForcing));
                }
                let amp = if order == 0 { amplitude } else { -rate * amplitude };
                let base = if order == 0 { offset } else { 0.0 };
                let Lower::From(lo) = lower else { unreachable!() };
                let span = t - lo;
                let decay = (-rate * (t - origin)).exp();
                Some(
                    constant_weighted(base, kappa, lower, t)
                        .map(|c| c + amp * decay * relax(kappa - rate, span)),
                )
            }
            _ => None,
        }
    }

    fn validate(&self) -> Result<()> {
        let finite = |name: &str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::NonFiniteParam(name.into()))
            }
        };
        match *self {
            ScalarFn::Constant { value } => finite("value", value),
            ScalarFn::StepPulse {
                base,
                amplitude,
                start,
                end,
                ramp,
            } => {
                for (n, v) in [
                    ("base", base),
                    ("amplitude", amplitude),
                    ("start", start),
                    ("end", end),
                ] {
                    finite(n, v)?;
                }
                if !(ramp > 0.0) || !ramp.is_finite() {
                    return Err(Error::NonPositiveParam("ramp".into()));
                }
                if end < start {
                    return Err(Error::InvalidSetting("step-pulse end precedes start".into()));
                }
                Ok(())
            }
            ScalarFn::Sinusoid {
                offset,
                amplitude,
                omega,
                phase,
            } => {
                for (n, v) in [
                    ("offset", offset),
                    ("amplitude", amplitude),
                    ("omega", omega),
                    ("phase", phase),
                ] {
                    finite(n, v)?;
                }
                Ok(())
            }
            ScalarFn::ExponentialDecay {
                offset,
                amplitude,
                rate,
                origin,
            } => {
                for (n, v) in [("offset", offset), ("amplitude", amplitude), ("origin", origin)] {
                    finite(n, v)?;
                }
                if !(rate >= 0.0) || !rate.is_finite() {
                    return Err(Error::NegativeParam("rate".into()));
                }
                Ok(())
            }
            ScalarFn::Tabulated(_) => Ok(()),
        }
    }
}

/// `∫_0^span e^{-k sigma} dsigma`, continuous through `k = 0`.
pub(crate) fn relax(k: f64, span: f64) -> f64 {
    if span <= 0.0 {
        return 0.0;
    }
    let z = k * span;
    if z.abs() < 1e-8 {
        span * (1.0 - 0.5 * z)
    } else {
        -(-z).exp_m1() / k
    }
}

fn constant_weighted(c: f64, kappa: f64, lower: Lower, t: f64) -> Result<f64> {
    match lower {
        Lower::From(lo) => Ok(c * relax(kappa, t - lo)),
        Lower::NegInfinity => {
            if c == 0.0 {
                Ok(0.0)
            } else if kappa > 0.0 {
                Ok(c / kappa)
            } else {
                Err(Error::UnboundedForcing)
            }
        }
    }
}

fn sine_weighted(amp: f64, omega: f64, phase: f64, kappa: f64, lower: Lower, t: f64) -> Result<f64> {
    if amp == 0.0 {
        return Ok(0.0);
    }
    let denom = kappa * kappa + omega * omega;
    if denom == 0.0 {
        return constant_weighted(amp * phase.sin(), kappa, lower, t);
    }
    let prim = |tau: f64| {
        let arg = omega * tau + phase;
        (kappa * (tau - t)).exp() * (kappa * arg.sin() - omega * arg.cos()) / denom
    };
    match lower {
        Lower::From(lo) => Ok(amp * (prim(t) - prim(lo))),
        Lower::NegInfinity if kappa > 0.0 => Ok(amp * prim(t)),
        Lower::NegInfinity => Err(Error::UnboundedForcing),
    }
}

fn smoothstep(z: f64, order: u8) -> f64 {
    if z <= 0.0 {
        return 0.0;
    }
    if z >= 1.0 {
        return if order == 0 { 1.0 } else { 0.0 };
    }
    match order {
        0 => z * z * z * (10.0 + z * (-15.0 + 6.0 * z)),
        1 => 30.0 * z * z * (1.0 - z) * (1.0 - z),
        _ => 60.0 * z * (1.0 - z) * (1.0 - 2.0 * z),
    }
}

/// How the initial profile continues past `ell` for the half-line problem.
#[derive(Debug, Clone, PartialEq)]
pub enum PhiExtension {
    /// The initial flux datum `phi - (D/v) phi'` is held at its value at `ell`.
    ConstantHold,
    Zero,
    Custom(ScalarFn),
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExitMode {
    Computed,
    Measured(ExitTrace),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub params: PhysicalParams,
    /// inlet concentration g(t)
    pub inlet: ScalarFn,
    /// initial profile phi(x) on [0, ell]
    pub initial: ScalarFn,
    pub exit: ExitMode,
    pub extension: PhiExtension,
}

impl Scenario {
    pub fn new(params: PhysicalParams, inlet: ScalarFn, initial: ScalarFn) -> Result<Self> {
        params.validate()?;
        inlet.validate()?;
        initial.validate()?;
        Ok(Self {
            params,
            inlet,
            initial,
            exit: ExitMode::Computed,
            extension: PhiExtension::ConstantHold,
        })
    }

    pub fn with_exit(mut self, exit: ExitMode) -> Self {
        self.exit = exit;
        self
    }

    pub fn with_extension(mut self, extension: PhiExtension) -> Result<Self> {
        if let PhiExtension::Custom(ref f) = extension {
            f.validate()?;
        }
        self.extension = extension;
        Ok(self)
    }

    pub fn transform(&self) -> TransformParams {
        derive_transform(&self.params)
    }

    /// Copy with a different domain length (used by the Danckwerts probe).
    pub fn with_length(&self, length: f64) -> Result<Self> {
        let mut s = self.clone();
        s.params.length = length;
        s.params.validate()?;
        Ok(s)
    }

    /// Initial flux concentration `phi - (D/v) phi'` on the half line.
    pub fn initial_flux(&self, x: f64) -> f64 {
        let p = &self.params;
        let ratio = p.diffusion / p.velocity;
        if x <= p.length {
            return self.initial.value(x) - ratio * self.initial.slope(x);
        }
        match self.extension {
            PhiExtension::ConstantHold => self.initial_flux(p.length),
            PhiExtension::Zero => 0.0,
            PhiExtension::Custom(ref f) => f.value(x) - ratio * f.slope(x),
        }
    }

    /// Mean of the one-sided limits of the initial flux datum at `x`.
    pub fn initial_flux_mid(&self, x: f64) -> f64 {
        let ell = self.params.length;
        if x == ell {
            let right = match self.extension {
                PhiExtension::ConstantHold => self.initial_flux(ell),
                _ => self.initial_flux(ell * (1.0 + f64::EPSILON) + f64::MIN_POSITIVE),
            };
            0.5 * (self.initial_flux(ell) + right)
        } else {
            self.initial_flux(x)
        }
    }
}

// ---------------------------------------------------------------------------
// config file schema

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FnConfig {
    Constant {
        value: f64,
    },
    StepPulse {
        #[serde(default)]
        base: f64,
        amplitude: f64,
        start: f64,
        end: f64,
        ramp: f64,
    },
    Sinusoid {
        #[serde(default)]
        offset: f64,
        amplitude: f64,
        omega: f64,
        #[serde(default)]
        phase: f64,
    },
    ExponentialDecay {
        #[serde(default)]
        offset: f64,
        amplitude: f64,
        rate: f64,
        #[serde(default)]
        origin: f64,
    },
    Tabulated {
        x: Vec<f64>,
        y: Vec<f64>,
    },
}

impl FnConfig {
    pub fn build(&self) -> Result<ScalarFn> {
        let f = match self.clone() {
            FnConfig::Constant { value } => ScalarFn::Constant { value },
            FnConfig::StepPulse {
                base,
                amplitude,
                start,
                end,
                ramp,
            } => ScalarFn::StepPulse {
                base,
                amplitude,
                start,
                end,
                ramp,
            },
            FnConfig::Sinusoid {
                offset,
                amplitude,
                omega,
                phase,
            } => ScalarFn::Sinusoid {
                offset,
                amplitude,
                omega,
                phase,
            },
            FnConfig::ExponentialDecay {
                offset,
                amplitude,
                rate,
                origin,
            } => ScalarFn::ExponentialDecay {
                offset,
                amplitude,
                rate,
                origin,
            },
            FnConfig::Tabulated { x, y } => {
                if x.is_empty() || y.is_empty() {
                    return Err(Error::EmptyTable);
                }
                if x.len() != y.len() {
                    return Err(Error::InvalidSetting("tabulated x and y differ in length".into()));
                }
                ScalarFn::tabulated(x, y)?
            }
        };
        f.validate()?;
        Ok(f)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExtensionKind {
    #[default]
    ConstantHold,
    Zero,
    Custom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialConfig {
    #[serde(flatten)]
    pub profile: FnConfig,
    #[serde(default)]
    pub extension: ExtensionKind,
    #[serde(default)]
    pub extension_fn: Option<FnConfig>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExitModeConfig {
    #[default]
    Computed,
    Measured,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExitConfig {
    #[serde(default)]
    pub mode: ExitModeConfig,
    /// measured trace CSV (`t,c_e`), relative to the config file
    #[serde(default)]
    pub file: Option<PathBuf>,
    /// constant measured exit concentration, as an alternative to `file`
    #[serde(default)]
    pub value: Option<f64>,
    #[serde(default)]
    pub samples: Option<usize>,
    #[serde(skip)]
    pub loaded: Option<(Vec<f64>, Vec<f64>)>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NumericsConfig {
    pub kind: Option<BoundaryKind>,
    pub mode: Option<SolveMode>,
    pub modes: Option<usize>,
    pub nx: Option<usize>,
    pub nt: Option<usize>,
    pub t_start: Option<f64>,
    pub t_end: Option<f64>,
    pub times: Option<Vec<f64>>,
    pub probe_length: Option<f64>,
    pub fd_nx: Option<usize>,
    pub fd_nt: Option<usize>,
    pub halfline_extent: Option<f64>,
    pub tail_correction: Option<bool>,
    pub oracle: Option<OracleKind>,
}

impl NumericsConfig {
    /// Checks every numeric setting that is present.
    pub fn validate(&self, params: &PhysicalParams) -> Result<()> {
        let counts = [
            ("modes", self.modes, 1),
            ("nx", self.nx, 2),
            ("nt", self.nt, 1),
            ("fd_nx", self.fd_nx, 3),
            ("fd_nt", self.fd_nt, 1),
        ];
        for (name, value, min) in counts {
            if let Some(v) = value {
                if v < min {
                    return Err(Error::InvalidSetting(format!(
                        "{name} must be at least {min}, got {v}"
                    )));
                }
            }
        }
        let reals = [
            ("t_start", self.t_start),
            ("t_end", self.t_end),
            ("probe_length", self.probe_length),
            ("halfline_extent", self.halfline_extent),
        ];
        for (name, value) in reals {
            if let Some(v) = value {
                if !v.is_finite() {
                    return Err(Error::NonFiniteParam(name.into()));
                }
            }
        }
        for (name, value) in [
            ("probe_length", self.probe_length),
            ("halfline_extent", self.halfline_extent),
        ] {
            if let Some(v) = value {
                if v <= 0.0 {
                    return Err(Error::NonPositiveParam(name.into()));
                }
            }
        }
        if let Some(extent) = self.halfline_extent {
            if extent < 1.0 {
                return Err(Error::InvalidSetting(format!(
                    "halfline_extent must be at least 1, got {extent}"
                )));
            }
        }
        let start = self.t_start.unwrap_or(params.t0);
        if start < params.t0 {
            return Err(Error::NonPositiveTime(start - params.t0));
        }
        if let Some(end) = self.t_end {
            if end <= start {
                return Err(Error::InvalidSetting(format!(
                    "t_end = {end} must exceed t_start = {start}"
                )));
            }
        }
        if let Some(ref times) = self.times {
            if times.is_empty() {
                return Err(Error::EmptyTable);
            }
            if times.iter().any(|t| !t.is_finite()) {
                return Err(Error::NonFiniteParam("times".into()));
            }
            if times.iter().any(|&t| t <= params.t0) {
                return Err(Error::InvalidSetting("times must lie after t0".into()));
            }
            if times.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::UnsortedTable);
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
    pub plot: Option<bool>,
    pub convergence: Option<bool>,
}

/// Raw contents of a scenario config file, before validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub params: PhysicalParams,
    pub inlet: FnConfig,
    pub initial: InitialConfig,
    #[serde(default)]
    pub exit: ExitConfig,
    #[serde(default)]
    pub numerics: NumericsConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let line = e
                .span()
                .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1)
                .unwrap_or(0);
            Error::ConfigParse {
                line,
                message: e.message().to_string(),
            }
        })
    }

    /// Reads the config and any measured trace it references.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::parse(&text)?;
        cfg.load_trace(path.parent().unwrap_or(Path::new(".")))?;
        Ok(cfg)
    }

    /// Reads the measured trace file, if any, resolved against `base`.
    pub fn load_trace(&mut self, base: &Path) -> Result<()> {
        if self.exit.mode == ExitModeConfig::Measured {
            if let Some(ref file) = self.exit.file {
                self.exit.loaded = Some(crate::exit::read_trace_csv(&base.join(file))?);
            }
        }
        Ok(())
    }
}

/// Turns a raw config into a validated scenario, reporting the first
/// violated invariant.
pub fn validate_scenario(raw: &ScenarioConfig) -> Result<Scenario> {
    raw.numerics.validate(&raw.params)?;
    let inlet = raw.inlet.build()?;
    let initial = raw.initial.profile.build()?;
    let mut scenario = Scenario::new(raw.params, inlet, initial)?;
    let extension = match raw.initial.extension {
        ExtensionKind::ConstantHold => PhiExtension::ConstantHold,
        ExtensionKind::Zero => PhiExtension::Zero,
        ExtensionKind::Custom => {
            let f = raw.initial.extension_fn.as_ref().ok_or_else(|| {
                Error::InvalidSetting("extension = \"custom\" needs [initial.extension_fn]".into())
            })?;
            PhiExtension::Custom(f.build()?)
        }
    };
    scenario = scenario.with_extension(extension)?;
    if raw.exit.mode == ExitModeConfig::Measured {
        let trace = match (&raw.exit.loaded, raw.exit.value) {
            (Some((t, c)), _) => ExitTrace::from_samples(t.clone(), c.clone(), Provenance::Measured)?,
            (None, Some(c)) => ExitTrace::constant(c, Provenance::Measured)?,
            (None, None) => {
                return Err(Error::InvalidSetting(
                    "measured exit needs `file` or `value`".into(),
                ))
            }
        };
        scenario = scenario.with_exit(ExitMode::Measured(trace));
    }
    Ok(scenario)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> PhysicalParams {
        PhysicalParams {
            retardation: 1.0,
            diffusion: 1.0,
            velocity: 2.0,
            decay: 1.0,
            production: 0.5,
            length: 1.0,
            t0: 0.0,
        }
    }

    #[test]
    fn valid_scenario_is_accepted() {
        assert!(Scenario::new(params(), ScalarFn::constant(1.0), ScalarFn::constant(0.0)).is_ok());
    }

    #[test]
    fn zero_diffusion_is_rejected() {
        let p = PhysicalParams {
            diffusion: 0.0,
            ..params()
        };
        assert!(matches!(p.validate(), Err(Error::NonPositiveParam(n)) if n == "D"));
    }

    #[test]
    fn production_without_decay_is_rejected() {
        let p = PhysicalParams {
            production: 1.0,
            decay: 0.0,
            ..params()
        };
        assert!(matches!(p.validate(), Err(Error::GammaWithoutDecay)));
    }

    #[test]
    fn transform_examples() {
        let t = derive_transform(&params());
        assert_eq!((t.r, t.s), (1.0, 2.0));
        let p = PhysicalParams {
            retardation: 2.0,
            diffusion: 0.5,
            velocity: 1.0,
            decay: 0.0,
            ..params()
        };
        let t = derive_transform(&p);
        assert_eq!((t.r, t.s), (1.0, 0.25));
    }

    #[test]
    fn scalar_fn_examples() {
        let c = ScalarFn::constant(3.0);
        assert_eq!(c.eval(7.0, 0), 3.0);
        assert_eq!(c.eval(7.0, 1), 0.0);
        let s = ScalarFn::Sinusoid {
            offset: 0.0,
            amplitude: 2.0,
            omega: 3.0,
            phase: 0.0,
        };
        assert_eq!(s.eval(0.0, 1), 6.0);
    }

    #[test]
    fn step_pulse_is_smooth_and_reaches_plateau() {
        let f = ScalarFn::StepPulse {
            base: 0.1,
            amplitude: 1.0,
            start: 1.0,
            end: 3.0,
            ramp: 0.5,
        };
        assert_eq!(f.value(0.0), 0.1);
        assert!((f.value(2.0) - 1.1).abs() < 1e-15);
        assert_eq!(f.value(5.0), 0.1);
        assert_eq!(f.slope(1.0), 0.0);
        assert_eq!(f.slope(1.5), 0.0);
    }

    #[test]
    fn weighted_integrals_match_quadrature() {
        use crate::quad::Simpson;
        let fns = [
            ScalarFn::constant(1.7),
            ScalarFn::Sinusoid {
                offset: 0.3,
                amplitude: 1.2,
                omega: 2.5,
                phase: 0.4,
            },
            ScalarFn::ExponentialDecay {
                offset: 0.5,
                amplitude: 2.0,
                rate: 0.7,
                origin: 0.2,
            },
        ];
        let q = Simpson::with_rel_tol(1e-12).panels(32);
        for f in &fns {
            for order in [0u8, 1] {
                for kappa in [0.0, 0.3, 4.0] {
                    let (lo, t) = (-0.5, 1.8);
                    let closed = f
                        .exp_weighted_integral(order, kappa, Lower::From(lo), t)
                        .unwrap()
                        .unwrap();
                    let num = q
                        .integrate(|tau| (kappa * (tau - t)).exp() * f.eval(tau, order), lo, t)
                        .unwrap();
                    assert!((closed - num).abs() < 1e-10, "{f:?} {order} {kappa}");
                }
            }
        }
        // semi-infinite sinusoid: compare against a long truncated integral
        let f = &fns[1];
        let closed = f
            .exp_weighted_integral(0, 2.0, Lower::NegInfinity, 0.3)
            .unwrap()
            .unwrap();
        let num = q
            .integrate(|tau| (2.0 * (tau - 0.3)).exp() * f.value(tau), 0.3 - 25.0, 0.3)
            .unwrap();
        assert!((closed - num).abs() < 1e-10);
        assert!(matches!(
            fns[2].exp_weighted_integral(0, 2.0, Lower::NegInfinity, 0.0),
            Some(Err(Error::UnboundedForcing))
        ));
    }

    #[test]
    fn constant_hold_extension_keeps_flux_datum_continuous() {
        let p = params();
        let r = derive_transform(&p).r;
        let x: Vec<f64> = (0..=40).map(|i| i as f64 / 40.0).collect();
        let y: Vec<f64> = x.iter().map(|&x| (r * x).exp() * x).collect();
        let s = Scenario::new(p, ScalarFn::constant(0.0), ScalarFn::tabulated(x, y).unwrap()).unwrap();
        let left = s.initial_flux(1.0);
        let right = s.initial_flux(1.0 + 1e-9);
        assert!((left - right).abs() < 1e-12);
    }

    #[test]
    fn config_roundtrip_and_line_numbers() {
        let text = r#"
[params]
R = 1.0
D = 1.0
v = 1.0
mu = 0.1
gamma = 0.05
ell = 1.0

[inlet]
kind = "constant"
value = 1.0

[initial]
kind = "tabulated"
x = [0.0, 0.5, 1.0]
y = [0.0, 0.2, 0.1]
extension = "zero"

[numerics]
modes = 32
kind = "danckwerts"
"#;
        let cfg = ScenarioConfig::parse(text).unwrap();
        assert_eq!(cfg.numerics.modes, Some(32));
        assert_eq!(cfg.numerics.kind, Some(BoundaryKind::Danckwerts));
        let s = validate_scenario(&cfg).unwrap();
        assert_eq!(s.extension, PhiExtension::Zero);

        let bad = text.replace("y = [0.0, 0.2, 0.1]", "y = [0.0, 0.2, 0.1]\nbogus = 3");
        // unknown keys inside a flattened table are ignored; a bad type is not
        assert!(ScenarioConfig::parse(&bad).is_ok());
        let bad = text.replace("D = 1.0", "D = \"one\"");
        match ScenarioConfig::parse(&bad) {
            Err(Error::ConfigParse { line, .. }) => assert_eq!(line, 4),
            other => panic!("{other:?}"),
        }
        let unsorted = text.replace("x = [0.0, 0.5, 1.0]", "x = [0.0, 1.5, 1.0]");
        let cfg = ScenarioConfig::parse(&unsorted).unwrap();
        assert!(matches!(validate_scenario(&cfg), Err(Error::UnsortedTable)));
        let empty = text
            .replace("x = [0.0, 0.5, 1.0]", "x = []")
            .replace("y = [0.0, 0.2, 0.1]", "y = []");
        let cfg = ScenarioConfig::parse(&empty).unwrap();
        assert!(matches!(validate_scenario(&cfg), Err(Error::EmptyTable)));
    }
}
