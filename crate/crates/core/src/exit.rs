//! Exit concentration from the half-line flux-concentration problem.
//!
//! The flux concentration `C_F = C - (D/v) C_x` obeys the same transport
//! equation as `C` on `0 < x < ∞`, with `C_F(0, t) = g(t)` and initial datum
//! `phi - (D/v) phi'`. Substituting `C_F = u e^{rx - st} + gamma/mu` leaves
//! the canonical heat equation `u_t = (D/R) u_xx`, solved here by the odd
//! extension of the initial datum plus a Duhamel integral of the boundary
//! datum. The exit concentration is `C_E(t) = C_F(ell, t)`.
//!
//! Every exponential factor is combined into a single exponent before it is
//! evaluated, so nothing overflows for large `s t`.

use std::f64::consts::PI;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{Scenario, TransformParams};
use crate::quad::Simpson;
use crate::spline::CubicSpline;

/// Default number of trace samples.
pub const DEFAULT_TRACE_SAMPLES: usize = 64;
const MIN_TRACE_SAMPLES: usize = 16;
/// `-ln(1e-16)`: Gaussian factors below `e^{-CUTOFF}` of their peak are dropped.
const CUTOFF: f64 = 36.841_361_487_904_734;
pub const REL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelOrder {
    Value,
    Dx,
}

/// Heat kernel `K(x, t) = e^{-x^2/4t} / sqrt(4 pi t)` or its `x`-derivative.
pub fn kernel(x: f64, t: f64, order: KernelOrder) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::NonPositiveTime(t));
    }
    let k = (-x * x / (4.0 * t)).exp() / (4.0 * PI * t).sqrt();
    Ok(match order {
        KernelOrder::Value => k,
        KernelOrder::Dx => -x / (2.0 * t) * k,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Computed,
    Measured,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Computed => "computed",
            Provenance::Measured => "measured",
        }
    }
}

/// Time-sampled exit concentration with a spline for values and slopes.
#[derive(Debug, Clone, PartialEq)]
pub struct ExitTrace {
    spline: CubicSpline,
    provenance: Provenance,
}

impl ExitTrace {
    pub fn from_samples(times: Vec<f64>, values: Vec<f64>, provenance: Provenance) -> Result<Self> {
        if times.is_empty() || values.is_empty() {
            return Err(Error::EmptyTable);
        }
        if times.len() != values.len() {
            return Err(Error::InvalidSetting("trace columns differ in length".into()));
        }
        Ok(Self {
            spline: CubicSpline::with_estimated_ends(times, values)?,
            provenance,
        })
    }

    /// A trace that is constant for all time.
    pub fn constant(value: f64, provenance: Provenance) -> Result<Self> {
        Self::from_samples(vec![0.0], vec![value], provenance)
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn times(&self) -> &[f64] {
        self.spline.knots()
    }

    pub fn values(&self) -> &[f64] {
        self.spline.values()
    }

    pub fn start(&self) -> f64 {
        self.spline.first()
    }

    pub fn end(&self) -> f64 {
        self.spline.last()
    }

    /// Constant traces are defined on the whole real line.
    pub fn is_constant(&self) -> bool {
        self.values().windows(2).all(|w| w[0] == w[1])
    }

    fn check(&self, t: f64) -> Result<()> {
        let start = self.start();
        if !self.is_constant() && t < start - 1e-12 * start.abs().max(1.0) {
            return Err(Error::TraceOutOfRange(t));
        }
        Ok(())
    }

    pub fn value(&self, t: f64) -> Result<f64> {
        self.check(t)?;
        Ok(self.spline.eval(t, 0))
    }

    pub fn derivative(&self, t: f64) -> Result<f64> {
        self.check(t)?;
        Ok(self.spline.eval(t, 1))
    }
}

/// Reads a measured trace: header `t,c_e`, strictly increasing `t`.
pub fn read_trace_csv(path: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_trace_csv(&text)
}

pub fn parse_trace_csv(text: &str) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, header)) if header.replace(' ', "").eq_ignore_ascii_case("t,c_e") => {}
        Some((i, _)) => {
            return Err(Error::ConfigParse {
                line: i + 1,
                message: "expected header `t,c_e`".into(),
            })
        }
        None => return Err(Error::EmptyTable),
    }
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (i, line) in lines {
        let bad = |message: &str| Error::ConfigParse {
            line: i + 1,
            message: message.into(),
        };
        let mut cols = line.split(',').map(str::trim);
        let t: f64 = cols
            .next()
            .and_then(|c| c.parse().ok())
            .ok_or_else(|| bad("bad t"))?;
        let c: f64 = cols
            .next()
            .and_then(|c| c.parse().ok())
            .ok_or_else(|| bad("bad c_e"))?;
        if cols.next().is_some() {
            return Err(bad("expected two columns"));
        }
        times.push(t);
        values.push(c);
    }
    if times.is_empty() {
        return Err(Error::EmptyTable);
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::UnsortedTable);
    }
    Ok((times, values))
}

/// Canonical half-line problem `u_t = (D/R) u_xx`, `u(x, t0) = Phi(x)`,
/// `u(0, t) = G(t)`, with
/// `Phi(x) = (phi_F(x) - gamma/mu) e^{-rx + s t0}` and
/// `G(t) = (g(t) - gamma/mu) e^{st}`. The exponential factors are kept
/// separately (see [`HalfLineProblem::initial_datum`]).
#[derive(Debug, Clone)]
pub struct HalfLineProblem {
    scenario: Scenario,
    transform: TransformParams,
    diffusivity: f64,
    equilibrium: f64,
    /// `mu / R = s - (D/R) r^2`
    rate: f64,
}

pub fn build_problem(scenario: &Scenario) -> Result<HalfLineProblem> {
    scenario.params.validate()?;
    Ok(HalfLineProblem {
        scenario: scenario.clone(),
        transform: scenario.transform(),
        diffusivity: scenario.params.diffusivity(),
        equilibrium: scenario.params.equilibrium(),
        rate: scenario.params.mode_zero_rate(),
    })
}

impl HalfLineProblem {
    pub fn t0(&self) -> f64 {
        self.scenario.params.t0
    }

    /// `(amplitude, exponent)` with `Phi(x) = amplitude * e^{exponent}`.
    pub fn initial_datum(&self, x: f64) -> (f64, f64) {
        let amp = self.scenario.initial_flux(x) - self.equilibrium;
        (amp, -self.transform.r * x + self.transform.s * self.t0())
    }

    /// `(amplitude, exponent)` with `G(t) = amplitude * e^{exponent}`.
    pub fn boundary_datum(&self, t: f64) -> (f64, f64) {
        (
            self.scenario.inlet.value(t) - self.equilibrium,
            self.transform.s * t,
        )
    }

    /// `u(x, t) * e^{offset - s t}`.
    pub fn u_scaled(&self, x: f64, t: f64, offset: f64) -> Result<f64> {
        if x <= 0.0 {
            return Err(Error::EvaluationAtBoundary);
        }
        let t0 = self.t0();
        if !(t > t0) {
            return Err(Error::NonPositiveTime(t - t0));
        }
        Ok(self.odd_extension_term(x, t, offset)? + self.duhamel_term(x, t, offset)?)
    }

    /// Initial-datum part of the representation: the odd extension of
    /// `Phi` convolved with the kernel at time `(D/R)(t - t0)`.
    pub fn odd_extension_term(&self, x: f64, t: f64, offset: f64) -> Result<f64> {
        let r = self.transform.r;
        let elapsed = t - self.t0();
        let big_t = self.diffusivity * elapsed;
        let ell = self.scenario.params.length;
        let width = (4.0 * big_t * CUTOFF).sqrt();
        let norm = 1.0 / (4.0 * PI * big_t).sqrt();
        let eq = self.equilibrium;
        let mut total = 0.0;
        // (centre, base exponent, sign) of the direct and mirrored Gaussians
        let terms = [
            (x - 2.0 * r * big_t, offset - r * x - self.rate * elapsed, 1.0),
            (-x - 2.0 * r * big_t, offset + r * x - self.rate * elapsed, -1.0),
        ];
        for (centre, base, sign) in terms {
            let lo = (centre - width).max(0.0);
            let hi = centre + width;
            if hi <= 0.0 {
                continue;
            }
            let f = |z: f64| {
                let d = z - centre;
                (base - d * d / (4.0 * big_t)).exp() * (self.scenario.initial_flux(z) - eq)
            };
            // the flux datum may jump at ell under the zero/custom extensions
            let mut pieces = vec![(lo, hi)];
            if lo < ell && ell < hi {
                pieces = vec![(lo, ell), (ell, hi)];
            }
            for (a, b) in pieces {
                total += sign
                    * Simpson::with_rel_tol(REL_TOL)
                        .panels(16)
                        .integrate(f, a, b)
                        .map_err(|_| Error::QuadratureNotConverged {
                            mode: 0,
                            which: "initial-datum",
                        })?;
            }
        }
        Ok(norm * total)
    }

    /// Boundary part `-(2D/R) ∫ K_x(x, (D/R)(t - tau)) G(tau) dtau`, evaluated
    /// with `eta = x / (2 sqrt((D/R)(t - tau)))`:
    /// `(2/sqrt(pi)) ∫ e^{-eta^2} G(t - x^2/(4 (D/R) eta^2)) deta`.
    pub fn duhamel_term(&self, x: f64, t: f64, offset: f64) -> Result<f64> {
        let elapsed = t - self.t0();
        let lower = x / (2.0 * (self.diffusivity * elapsed).sqrt());
        self.duhamel_from(x, t, offset, lower)
    }

    fn duhamel_from(&self, x: f64, t: f64, offset: f64, eta_min: f64) -> Result<f64> {
        let r = self.transform.r;
        let b = 0.5 * r * x;
        let root = (CUTOFF + 4.0 * b).sqrt();
        let lo = eta_min.max(0.5 * (root - CUTOFF.sqrt()));
        let hi = 0.5 * (root + CUTOFF.sqrt());
        if lo >= hi {
            return Ok(0.0);
        }
        let eq = self.equilibrium;
        let shift = offset - r * x;
        let f = |eta: f64| {
            if eta <= 0.0 {
                return 0.0;
            }
            let theta = x * x / (4.0 * self.diffusivity * eta * eta);
            let gap = eta - b / eta;
            let g = self.scenario.inlet.value(t - theta) - eq;
            (shift - gap * gap - self.rate * theta).exp() * g
        };
        let v = Simpson::with_rel_tol(REL_TOL)
            .panels(16)
            .integrate(f, lo, hi)
            .map_err(|_| Error::QuadratureNotConverged {
                mode: 0,
                which: "duhamel",
            })?;
        Ok(2.0 / PI.sqrt() * v)
    }

    /// Flux concentration `C_F(x, t) = u e^{rx - st} + gamma/mu`; at
    /// `t = t0` this is the initial flux datum.
    pub fn flux_concentration(&self, x: f64, t: f64) -> Result<f64> {
        if t <= self.t0() {
            return Ok(self.scenario.initial_flux_mid(x));
        }
        if x <= 0.0 {
            return Ok(self.scenario.inlet.value(t));
        }
        let r = self.transform.r;
        Ok(self.u_scaled(x, t, r * x)? + self.equilibrium)
    }

    /// Limit of `C_F(x, t)` as `t0 -> -inf` with the inlet held at its
    /// current definition for all past times.
    pub fn flux_concentration_large_t(&self, x: f64, t: f64) -> Result<f64> {
        if x <= 0.0 {
            return Ok(self.scenario.inlet.value(t));
        }
        let r = self.transform.r;
        Ok(self.duhamel_from(x, t, r * x, 0.0)? + self.equilibrium)
    }
}

/// `u(x, t) * e^{offset - s t}` for the half-line problem.
pub fn halfline_u(p: &HalfLineProblem, x: f64, t: f64, offset: f64) -> Result<f64> {
    p.u_scaled(x, t, offset)
}

/// Chebyshev-Lobatto nodes on `[a, b]`, increasing.
pub fn chebyshev_nodes(a: f64, b: f64, n: usize) -> Vec<f64> {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut nodes: Vec<f64> = (0..n)
        .map(|i| mid - half * (PI * i as f64 / (n - 1) as f64).cos())
        .collect();
    nodes[0] = a;
    nodes[n - 1] = b;
    nodes
}

/// Samples `C_E(t) = C_F(ell, t)` on a Chebyshev grid over `window` and
/// splines the result.
pub fn exit_trace(scenario: &Scenario, window: (f64, f64), samples: usize) -> Result<ExitTrace> {
    let (a, b) = window;
    let t0 = scenario.params.t0;
    if !(a >= t0) || !(b > a) {
        return Err(Error::InvalidSetting(format!(
            "exit-trace window [{a}, {b}] must satisfy t0 <= start < end"
        )));
    }
    if samples < MIN_TRACE_SAMPLES {
        return Err(Error::InvalidSetting(format!(
            "exit trace needs at least {MIN_TRACE_SAMPLES} samples"
        )));
    }
    let problem = build_problem(scenario)?;
    let ell = scenario.params.length;
    let times = chebyshev_nodes(a, b, samples);
    let values = times
        .par_iter()
        .map(|&t| problem.flux_concentration(ell, t))
        .collect::<Result<Vec<_>>>()?;
    ExitTrace::from_samples(times, values, Provenance::Computed)
}

/// Exit concentration once the half-line problem has forgotten its initial
/// datum, for a constant inlet: `gamma/mu + (g - gamma/mu) e^{m ell}` with
/// `m = r - sqrt(r^2 + mu/D)`.
pub fn steady_exit_value(scenario: &Scenario) -> Result<f64> {
    if !scenario.inlet.is_constant() {
        return Err(Error::InvalidSetting(
            "a computed large-t exit concentration needs a constant inlet".into(),
        ));
    }
    let p = &scenario.params;
    let r = scenario.transform().r;
    let eq = p.equilibrium();
    let m = r - (r * r + p.decay / p.diffusion).sqrt();
    Ok(eq + (scenario.inlet.value(p.t0) - eq) * (m * p.length).exp())
}

/// Trace to feed the Robin solution: a measured trace as given, otherwise
/// a computed one over `[t0, t_end]` (or the steady value for large-t use).
pub fn resolve_exit_trace(
    scenario: &Scenario,
    t_end: f64,
    samples: usize,
    large_t: bool,
) -> Result<ExitTrace> {
    match scenario.exit {
        crate::model::ExitMode::Measured(ref trace) => Ok(trace.clone()),
        crate::model::ExitMode::Computed if large_t => {
            ExitTrace::constant(steady_exit_value(scenario)?, Provenance::Computed)
        }
        crate::model::ExitMode::Computed => exit_trace(scenario, (scenario.params.t0, t_end), samples),
    }
}
