//! Eigenfunction-series solution of the finite-domain problem.
//!
//! With `C = e^{rx} (W + H)` the reduced field `W` obeys
//! `W_t = (D/R) W_xx - s W + F` with homogeneous boundary conditions, where
//! `H` lifts the inhomogeneous boundary data and
//!
//! ```text
//! F = (gamma/R) e^{-rx} - (s H + H_t) + (D/R) H_xx.
//! ```
//!
//! Expanding `W = sum c_n(t) phi_n(x)` gives for `kappa_n = s + (D/R) lambda_n`
//!
//! ```text
//! c_n(t) = [ e^{-kappa_n (t - t0)} P_n + ∫_{t0}^t e^{kappa_n (tau - t)} F_n(tau) dtau ] / |phi_n|^2
//! ```
//!
//! with `P_n = <e^{-rx} phi - H(., t0), phi_n>`. Every exponential above is
//! bounded by one, so nothing overflows for large times or high modes. The
//! large-t solution drops `P_n` and starts the integral at `-inf`.
//!
//! `F` separates into fixed spatial shapes times the inlet `g`, the scaled
//! exit value `E = e^{-r ell} C_E` and their derivatives, so each `F_n` is a
//! short linear combination of scalar functions of time.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eigen::{build_basis, eval_mode, BoundaryKind, EigenBasis};
use crate::error::{Error, Result};
use crate::exit::{resolve_exit_trace, ExitTrace, DEFAULT_TRACE_SAMPLES};
use crate::linalg::solve_2x2;
use crate::model::{Lower, ScalarFn, Scenario, TransformParams};
use crate::quad::Simpson;

pub const SPACE_REL_TOL: f64 = 1e-10;
pub const TIME_REL_TOL: f64 = 1e-8;
/// `e^{-37} < 1e-16`: the weighted time integral is cut there.
const SIGMA_MAX: f64 = 37.0;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveMode {
    #[default]
    InitialValue,
    LargeT,
}

impl SolveMode {
    pub fn as_str(self) -> &'static str {
        match self {
            SolveMode::InitialValue => "initial-value",
            SolveMode::LargeT => "large-t",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HDeriv {
    Value,
    Dt,
    Dx,
    Dxx,
}

/// Boundary lift `H` and forcing `F` for one boundary family.
#[derive(Debug, Clone)]
pub struct ForcingSpec {
    kind: BoundaryKind,
    scenario: Scenario,
    transform: TransformParams,
    trace: Option<ExitTrace>,
    exit_scale: f64,
}

impl ForcingSpec {
    /// `H = (1 + cos(pi x/ell)) g + (1 - cos(pi x/ell)) e^{-r ell} C_E`.
    pub fn robin(scenario: &Scenario, trace: ExitTrace) -> Self {
        let transform = scenario.transform();
        Self {
            kind: BoundaryKind::Robin,
            exit_scale: (-transform.r * scenario.params.length).exp(),
            scenario: scenario.clone(),
            transform,
            trace: Some(trace),
        }
    }

    /// `H_D = (1 + cos(pi x/ell)) g`.
    pub fn danckwerts(scenario: &Scenario) -> Self {
        Self {
            kind: BoundaryKind::Danckwerts,
            scenario: scenario.clone(),
            transform: scenario.transform(),
            trace: None,
            exit_scale: 0.0,
        }
    }

    /// Robin forcing with its exit trace resolved from the scenario.
    pub fn for_kind(scenario: &Scenario, kind: BoundaryKind, t_end: f64, mode: SolveMode) -> Result<Self> {
        Ok(match kind {
            BoundaryKind::Danckwerts => Self::danckwerts(scenario),
            BoundaryKind::Robin => {
                let large_t = mode == SolveMode::LargeT;
                let trace = resolve_exit_trace(scenario, t_end, DEFAULT_TRACE_SAMPLES, large_t)?;
                Self::robin(scenario, trace)
            }
        })
    }

    pub fn kind(&self) -> BoundaryKind {
        self.kind
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn trace(&self) -> Option<&ExitTrace> {
        self.trace.as_ref()
    }

    fn trace_ref(&self) -> Result<&ExitTrace> {
        self.trace.as_ref().ok_or(Error::MissingExitTrace)
    }

    /// `E(t) = e^{-r ell} C_E(t)` (zero for Danckwerts).
    fn exit_part(&self, t: f64, order: u8) -> Result<f64> {
        match self.kind {
            BoundaryKind::Danckwerts => Ok(0.0),
            BoundaryKind::Robin => {
                let tr = self.trace_ref()?;
                let v = if order == 0 {
                    tr.value(t)?
                } else {
                    tr.derivative(t)?
                };
                Ok(self.exit_scale * v)
            }
        }
    }

    fn exit_is_constant(&self) -> bool {
        self.trace.as_ref().is_none_or(ExitTrace::is_constant)
    }

    pub fn eval_h(&self, x: f64, t: f64, deriv: HDeriv) -> Result<f64> {
        let w = PI / self.scenario.params.length;
        let (sin, cos) = (w * x).sin_cos();
        let g = &self.scenario.inlet;
        Ok(match deriv {
            HDeriv::Value => (1.0 + cos) * g.value(t) + (1.0 - cos) * self.exit_part(t, 0)?,
            HDeriv::Dt => (1.0 + cos) * g.slope(t) + (1.0 - cos) * self.exit_part(t, 1)?,
            HDeriv::Dx => -w * sin * (g.value(t) - self.exit_part(t, 0)?),
            HDeriv::Dxx => -w * w * cos * (g.value(t) - self.exit_part(t, 0)?),
        })
    }

    pub fn eval_f(&self, x: f64, t: f64) -> Result<f64> {
        let p = &self.scenario.params;
        let h = self.eval_h(x, t, HDeriv::Value)?;
        let ht = self.eval_h(x, t, HDeriv::Dt)?;
        let hxx = self.eval_h(x, t, HDeriv::Dxx)?;
        Ok(
            p.production / p.retardation * (-self.transform.r * x).exp() - (self.transform.s * h + ht)
                + p.diffusivity() * hxx,
        )
    }
}

/// Spatial data of one mode: the inner products of `phi_n` with `1`,
/// `cos(pi x/ell)`, `e^{-rx}` and `e^{-rx} phi`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct ModeData {
    kappa: f64,
    norm_sq: f64,
    /// weights of `1, g, g', E, E'` in `F_n`
    weights: [f64; 5],
    /// `<e^{-rx} phi - H(., t0), phi_n>`
    initial: f64,
}

/// Per-mode data needed to evaluate the reduced coefficients `c_n(t)`.
#[derive(Debug, Clone)]
pub struct CoefficientTable {
    basis: EigenBasis,
    modes: Vec<ModeData>,
    t0: f64,
}

impl CoefficientTable {
    pub fn build(forcing: &ForcingSpec, basis: EigenBasis, mode: SolveMode) -> Result<Self> {
        let s = &forcing.scenario;
        let p = &s.params;
        let (r, sv) = (forcing.transform.r, forcing.transform.s);
        let ell = p.length;
        let a = p.diffusivity();
        let w2 = (PI / ell).powi(2);
        let t0 = p.t0;
        let (g0, e0) = match mode {
            SolveMode::InitialValue => (s.inlet.value(t0), forcing.exit_part(t0, 0)?),
            SolveMode::LargeT => (0.0, 0.0),
        };
        let modes = basis
            .pairs
            .par_iter()
            .map(|pair| {
                let n = pair.n;
                let quad = Simpson::with_rel_tol(SPACE_REL_TOL).panels(8 + 2 * n);
                let project = |f: &dyn Fn(f64) -> f64, which| {
                    quad.integrate(|x| f(x) * eval_mode(pair, r, x, 0), 0.0, ell)
                        .map_err(|_| Error::QuadratureNotConverged { mode: n, which })
                };
                let q = project(&|_| 1.0, "space")?;
                let c = project(&|x| (PI * x / ell).cos(), "space")?;
                let pe = project(&|x| (-r * x).exp(), "space")?;
                let initial = match mode {
                    SolveMode::LargeT => 0.0,
                    SolveMode::InitialValue => {
                        project(&|x| (-r * x).exp() * s.initial.value(x), "initial")?
                            - (q + c) * g0
                            - (q - c) * e0
                    }
                };
                let weights = [
                    p.production / p.retardation * pe,
                    -sv * (q + c) - a * w2 * c,
                    -(q + c),
                    -sv * (q - c) + a * w2 * c,
                    -(q - c),
                ];
                Ok(ModeData {
                    kappa: sv + a * pair.lambda,
                    norm_sq: pair.norm_sq,
                    weights,
                    initial,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { basis, modes, t0 })
    }

    pub fn basis(&self) -> &EigenBasis {
        &self.basis
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    /// `kappa_n = s + (D/R) lambda_n`, the decay rate of mode `idx` in the
    /// physical variable.
    pub fn rate(&self, idx: usize) -> f64 {
        self.modes[idx].kappa
    }

    /// `c_n(t) = e^{-st} T_n(t)`.
    pub fn reduced_coefficient(
        &self,
        forcing: &ForcingSpec,
        idx: usize,
        t: f64,
        mode: SolveMode,
    ) -> Result<f64> {
        let m = &self.modes[idx];
        let (lower, homogeneous) = match mode {
            SolveMode::InitialValue => {
                if t < self.t0 {
                    return Err(Error::NonPositiveTime(t - self.t0));
                }
                let h = if m.initial == 0.0 {
                    0.0
                } else {
                    m.initial * (-m.kappa * (t - self.t0)).exp()
                };
                (Lower::From(self.t0), h)
            }
            SolveMode::LargeT => (Lower::NegInfinity, 0.0),
        };
        let forced = time_integral(forcing, m, idx, lower, t)?;
        Ok((homogeneous + forced) / m.norm_sq)
    }
}

/// `∫ e^{kappa (tau - t)} F_n(tau) dtau` over `[lower, t]`.
fn time_integral(forcing: &ForcingSpec, m: &ModeData, idx: usize, lower: Lower, t: f64) -> Result<f64> {
    let kappa = m.kappa;
    let [w_c, w_g, w_dg, w_e, w_de] = m.weights;
    let inlet = &forcing.scenario.inlet;
    let mut total = ScalarFn::constant(w_c)
        .exp_weighted_integral(0, kappa, lower, t)
        .expect("constant has a closed form")?;

    let mut numeric_g = false;
    for (order, w) in [(0u8, w_g), (1, w_dg)] {
        match inlet.exp_weighted_integral(order, kappa, lower, t) {
            Some(v) => total += w * v?,
            None => numeric_g = true,
        }
    }
    let numeric_e = forcing.kind == BoundaryKind::Robin && !forcing.exit_is_constant();
    if forcing.kind == BoundaryKind::Robin && !numeric_e {
        let e = forcing.exit_part(t, 0)?;
        total += ScalarFn::constant(w_e * e)
            .exp_weighted_integral(0, kappa, lower, t)
            .expect("constant has a closed form")?;
    }
    if !numeric_g && !numeric_e {
        return Ok(total);
    }

    let span = match lower {
        Lower::From(lo) => t - lo,
        Lower::NegInfinity => f64::INFINITY,
    };
    if span <= 0.0 {
        return Ok(total);
    }
    if !(kappa > 0.0) && span.is_infinite() {
        return Err(Error::UnboundedForcing);
    }
    let trace = forcing.trace.as_ref();
    let scale = forcing.exit_scale;
    let tau_min = t - span;
    let h = |tau: f64| {
        // keep rounding in t - sigma/kappa from stepping below the start
        let tau = tau.max(tau_min);
        let mut v = 0.0;
        if numeric_g {
            v += w_g * inlet.value(tau) + w_dg * inlet.slope(tau);
        }
        if let (true, Some(tr)) = (numeric_e, trace) {
            let e = tr.value(tau).unwrap_or(f64::NAN);
            let de = tr.derivative(tau).unwrap_or(f64::NAN);
            v += scale * (w_e * e + w_de * de);
        }
        v
    };
    let quad = Simpson::with_rel_tol(TIME_REL_TOL);
    let fail = |_| Error::QuadratureNotConverged {
        mode: idx,
        which: "time",
    };
    let z = kappa * span;
    let value = if z > 1.0 {
        // sigma = kappa (t - tau)
        let top = z.min(SIGMA_MAX);
        if numeric_e {
            forcing.exit_part(t - top / kappa, 0)?;
        }
        quad.integrate(|sig| (-sig).exp() * h(t - sig / kappa), 0.0, top)
            .map_err(fail)?
            / kappa
    } else {
        let lo = t - span;
        if numeric_e {
            forcing.exit_part(lo, 0)?;
        }
        quad.integrate(|tau| (kappa * (tau - t)).exp() * h(tau), lo, t)
            .map_err(fail)?
    };
    Ok(total + value)
}

/// Truncated series solution `C(x, t)` on `[0, ell]`.
///
/// By default the modes beyond the truncation are replaced by their
/// quasi-static limit `F_n(t) / (kappa_n |phi_n|^2)`, summed in closed form
/// as the solution `G` of `(s - (D/R) d_xx) G = F` with the homogeneous
/// boundary conditions. Without it the truncated series leaves a residual
/// of order `N^-2` near the walls.
#[derive(Debug, Clone)]
pub struct SolutionField {
    forcing: ForcingSpec,
    table: CoefficientTable,
    mode: SolveMode,
    tail_correction: bool,
}

/// Everything needed to evaluate the field at one time.
#[derive(Debug, Clone)]
pub struct TimeSlice {
    pub t: f64,
    /// reduced coefficients, with the quasi-static part of the retained
    /// modes already removed when a remainder is present
    pub coefficients: Vec<f64>,
    remainder: Option<QuasiStatic>,
}

/// `ramp (G_p + A e^{m (x - ell)} + B e^{-mx})`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct QuasiStatic {
    exp_coef: f64,
    constant: f64,
    cos_coef: f64,
    a: f64,
    b: f64,
    m: f64,
    r: f64,
    w: f64,
    ell: f64,
}

impl QuasiStatic {
    fn eval(&self, x: f64, order: u8) -> f64 {
        let ex = (-self.r * x).exp();
        let up = (self.m * (x - self.ell)).exp();
        let down = (-self.m * x).exp();
        let (sin, cos) = (self.w * x).sin_cos();
        match order {
            0 => self.exp_coef * ex + self.constant + self.cos_coef * cos + self.a * up + self.b * down,
            _ => {
                -self.r * self.exp_coef * ex - self.w * self.cos_coef * sin
                    + self.m * (self.a * up - self.b * down)
            }
        }
    }
}

/// Builds the series solution with `modes` eigenpairs.
pub fn solve(forcing: ForcingSpec, modes: usize, mode: SolveMode) -> Result<SolutionField> {
    let s = &forcing.scenario;
    let basis = build_basis(forcing.kind, forcing.transform.r, s.params.length, modes)?;
    let table = CoefficientTable::build(&forcing, basis, mode)?;
    Ok(SolutionField {
        forcing,
        table,
        mode,
        tail_correction: true,
    })
}

/// Large-t (pure boundary-value) solution, valid for every real `t`.
pub fn solve_large_t(forcing: ForcingSpec, modes: usize) -> Result<SolutionField> {
    solve(forcing, modes, SolveMode::LargeT)
}

/// Resolves the exit trace (Robin) over `[t0, t_end]` and solves.
pub fn solve_scenario(
    scenario: &Scenario,
    kind: BoundaryKind,
    modes: usize,
    mode: SolveMode,
    t_end: f64,
) -> Result<SolutionField> {
    solve(ForcingSpec::for_kind(scenario, kind, t_end, mode)?, modes, mode)
}

impl SolutionField {
    pub fn kind(&self) -> BoundaryKind {
        self.forcing.kind
    }

    pub fn mode(&self) -> SolveMode {
        self.mode
    }

    pub fn modes(&self) -> usize {
        self.table.len()
    }

    pub fn forcing(&self) -> &ForcingSpec {
        &self.forcing
    }

    pub fn table(&self) -> &CoefficientTable {
        &self.table
    }

    pub fn scenario(&self) -> &Scenario {
        &self.forcing.scenario
    }

    pub fn with_tail_correction(mut self, on: bool) -> Self {
        self.tail_correction = on;
        self
    }

    /// Whether the quasi-static remainder is applied. It is unavailable when
    /// the lowest rate vanishes (Robin without decay).
    pub fn tail_correction(&self) -> bool {
        self.tail_correction && !self.table.is_empty() && self.table.rate(0) > 0.0
    }

    /// All reduced coefficients at time `t`, in basis order.
    pub fn coefficients(&self, t: f64) -> Result<Vec<f64>> {
        (0..self.table.len())
            .into_par_iter()
            .map(|i| self.table.reduced_coefficient(&self.forcing, i, t, self.mode))
            .collect()
    }

    pub fn slice(&self, t: f64) -> Result<TimeSlice> {
        let mut coefficients = self.coefficients(t)?;
        if !self.tail_correction() {
            return Ok(TimeSlice {
                t,
                coefficients,
                remainder: None,
            });
        }
        let ramp = match self.mode {
            SolveMode::LargeT => 1.0,
            SolveMode::InitialValue => {
                let last = self.table.modes.last().map_or(0.0, |m| m.kappa);
                -(-last * (t - self.table.t0)).exp_m1()
            }
        };
        let f = &self.forcing;
        let inlet = &f.scenario.inlet;
        let parts = [
            1.0,
            inlet.value(t),
            inlet.slope(t),
            f.exit_part(t, 0)?,
            f.exit_part(t, 1)?,
        ];
        for (c, m) in coefficients.iter_mut().zip(&self.table.modes) {
            let fn_t: f64 = m.weights.iter().zip(parts).map(|(w, p)| w * p).sum();
            *c -= ramp * fn_t / (m.kappa * m.norm_sq);
        }
        Ok(TimeSlice {
            t,
            coefficients,
            remainder: Some(self.quasi_static(parts, ramp)?),
        })
    }

    fn quasi_static(&self, [_, g, dg, e, de]: [f64; 5], ramp: f64) -> Result<QuasiStatic> {
        let p = &self.forcing.scenario.params;
        let TransformParams { r, s } = self.forcing.transform;
        let a = p.diffusivity();
        let ell = p.length;
        let w = PI / ell;
        let x_part = -s * g - dg;
        let y_part = -s * e - de;
        let f_exp = p.production / p.retardation;
        let exp_coef = if f_exp == 0.0 {
            0.0
        } else {
            f_exp / (p.decay / p.retardation)
        };
        let constant = (x_part + y_part) / s;
        let cos_coef = (x_part - y_part + a * w * w * (e - g)) / (s + a * w * w);
        let m = (s / a).sqrt();
        // W_x - r W = 0 at 0; W_x - r W = 0 (Robin) or W_x + r W = 0 (Danckwerts) at ell
        let sigma = match self.forcing.kind {
            BoundaryKind::Robin => -1.0,
            BoundaryKind::Danckwerts => 1.0,
        };
        let decay = (-m * ell).exp();
        let ex_ell = (-r * ell).exp();
        let gp0 = exp_coef + constant + cos_coef;
        let dgp0 = -r * exp_coef;
        let gpl = exp_coef * ex_ell + constant - cos_coef;
        let dgpl = -r * exp_coef * ex_ell;
        let [ca, cb] = solve_2x2(
            [
                [decay * (m - r), -(m + r)],
                [m + sigma * r, decay * (sigma * r - m)],
            ],
            [-(dgp0 - r * gp0), -(dgpl + sigma * r * gpl)],
        )
        .ok_or(Error::SingularSystem)?;
        Ok(QuasiStatic {
            exp_coef: ramp * exp_coef,
            constant: ramp * constant,
            cos_coef: ramp * cos_coef,
            a: ramp * ca,
            b: ramp * cb,
            m,
            r,
            w,
            ell,
        })
    }

    /// `C(x, t)` at the slice time.
    pub fn eval_at(&self, slice: &TimeSlice, x: f64) -> Result<f64> {
        let w = self.reduced(slice, x, 0) + self.forcing.eval_h(x, slice.t, HDeriv::Value)?;
        Ok((self.forcing.transform.r * x).exp() * w)
    }

    /// `C_x(x, t)` at the slice time.
    pub fn eval_dx_at(&self, slice: &TimeSlice, x: f64) -> Result<f64> {
        let r = self.forcing.transform.r;
        let w = self.reduced(slice, x, 0) + self.forcing.eval_h(x, slice.t, HDeriv::Value)?;
        let dw = self.reduced(slice, x, 1) + self.forcing.eval_h(x, slice.t, HDeriv::Dx)?;
        Ok((r * x).exp() * (r * w + dw))
    }

    fn reduced(&self, slice: &TimeSlice, x: f64, order: u8) -> f64 {
        let b = self.table.basis();
        let sum: f64 = slice
            .coefficients
            .iter()
            .enumerate()
            .map(|(i, c)| c * b.eval_phi(i, x, order))
            .sum();
        sum + slice.remainder.map_or(0.0, |q| q.eval(x, order))
    }

    pub fn eval(&self, x: f64, t: f64) -> Result<f64> {
        self.eval_at(&self.slice(t)?, x)
    }

    pub fn eval_dx(&self, x: f64, t: f64) -> Result<f64> {
        self.eval_dx_at(&self.slice(t)?, x)
    }

    /// Profile `C(x_i, t)`.
    pub fn snapshot(&self, t: f64, xs: &[f64]) -> Result<Vec<f64>> {
        let slice = self.slice(t)?;
        xs.iter().map(|&x| self.eval_at(&slice, x)).collect()
    }

    /// Field on a tensor grid, one row per time.
    pub fn sample(&self, xs: &[f64], ts: &[f64]) -> Result<Vec<Vec<f64>>> {
        ts.par_iter().map(|&t| self.snapshot(t, xs)).collect()
    }

    /// Size of the last retained mode's contribution, as a truncation
    /// indicator: `|c_{N-1}| max|phi_{N-1}| e^{r ell}`.
    pub fn tail_estimate(&self, t: f64) -> Result<f64> {
        let last = self.table.len() - 1;
        let c = self
            .table
            .reduced_coefficient(&self.forcing, last, t, self.mode)?;
        let pair = &self.table.basis().pairs[last];
        let r = self.forcing.transform.r;
        let peak = if pair.is_negative_mode() {
            1.0
        } else {
            (1.0 + r * r / pair.lambda).sqrt()
        };
        Ok(c.abs() * peak * (r * self.scenario().params.length).exp())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimateFlag {
    Pass,
    Fail,
    Indeterminate,
}

impl EstimateFlag {
    pub fn as_str(self) -> &'static str {
        match self {
            EstimateFlag::Pass => "pass",
            EstimateFlag::Fail => "fail",
            EstimateFlag::Indeterminate => "indeterminate",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorRow {
    pub t: f64,
    /// `|C(ell, t) - C_D(ell, t)|`
    pub e_d: f64,
    /// `|C_bv(L, t) - C_Dbv(L, t)|` on a domain of length `L`
    pub probe: f64,
    /// `|gamma/mu|`
    pub floor: f64,
    pub flag: EstimateFlag,
}

/// Smallest difference ever treated as signal.
const NOISE: f64 = 1e-8;

/// Exit-value gap between the Robin and Danckwerts solutions, with the
/// chain `E_D >= probe >= |gamma/mu|` reported per row.
///
/// Rows are `indeterminate` when `E_D` sits at the noise level or does not
/// decrease over the requested times. The noise level of a difference is
/// `modes` times the summed tail estimates of the two solutions involved.
pub fn error_estimate(
    scenario: &Scenario,
    modes: usize,
    times: &[f64],
    probe_length: f64,
) -> Result<Vec<ErrorRow>> {
    if times.is_empty() {
        return Err(Error::InvalidSetting(
            "error estimate needs at least one time".into(),
        ));
    }
    if !(probe_length > 0.0) || !probe_length.is_finite() {
        return Err(Error::NonPositiveParam("probe_length".into()));
    }
    let t_end = times.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let ell = scenario.params.length;
    let robin = solve_scenario(
        scenario,
        BoundaryKind::Robin,
        modes,
        SolveMode::InitialValue,
        t_end,
    )?;
    let danck = solve_scenario(
        scenario,
        BoundaryKind::Danckwerts,
        modes,
        SolveMode::InitialValue,
        t_end,
    )?;
    let probe_scn = scenario.with_length(probe_length)?;
    let robin_bv = solve_scenario(&probe_scn, BoundaryKind::Robin, modes, SolveMode::LargeT, t_end)?;
    let danck_bv = solve_scenario(
        &probe_scn,
        BoundaryKind::Danckwerts,
        modes,
        SolveMode::LargeT,
        t_end,
    )?;
    let floor = scenario.params.equilibrium().abs();

    let raw = times
        .par_iter()
        .map(|&t| {
            let e_d = (robin.eval(ell, t)? - danck.eval(ell, t)?).abs();
            let probe = (robin_bv.eval(probe_length, t)? - danck_bv.eval(probe_length, t)?).abs();
            let n = modes as f64;
            let noise_e = NOISE + n * (robin.tail_estimate(t)? + danck.tail_estimate(t)?);
            let noise_p = NOISE + n * (robin_bv.tail_estimate(t)? + danck_bv.tail_estimate(t)?);
            Ok((t, e_d, probe, noise_e, noise_p))
        })
        .collect::<Result<Vec<_>>>()?;
    let nonincreasing = raw.windows(2).all(|w| w[1].1 <= w[0].1 + w[0].3.max(w[1].3));
    Ok(raw
        .into_iter()
        .map(|(t, e_d, probe, noise_e, noise_p)| {
            let flag = if e_d < noise_e || !nonincreasing {
                EstimateFlag::Indeterminate
            } else if e_d + noise_e >= probe && probe + noise_p >= floor {
                EstimateFlag::Pass
            } else {
                EstimateFlag::Fail
            };
            ErrorRow {
                t,
                e_d,
                probe,
                floor,
                flag,
            }
        })
        .collect())
}
