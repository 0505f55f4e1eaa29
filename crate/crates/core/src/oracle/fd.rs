//! Crank-Nicolson finite differences for the transport equation.
//!
//! Centred differences in space, trapezoidal rule in time. The first two
//! steps are replaced by four backward-Euler half steps so that
//! incompatible initial and boundary data do not leave undamped
//! oscillations. Flux conditions are imposed through ghost nodes.

use crate::error::{Error, Result};
use crate::exit::ExitTrace;
use crate::linalg::thomas;
use crate::model::Scenario;

/// Default half-line truncation, in multiples of `ell`.
pub const DEFAULT_EXTENT: f64 = 10.0;
const STARTUP_STEPS: usize = 2;

#[derive(Debug, Clone)]
pub enum ExitCondition {
    /// `v C - D C_x = v C_E(t)` at `ell`.
    RobinTrace(ExitTrace),
    /// `C_x = 0` at `ell`.
    DanckwertsNeumann,
    /// Flux-concentration problem on `[0, extent * ell]`: `C_F = g` at the
    /// inlet, `C_x = 0` far away, initial datum `phi - (D/v) phi'`.
    DirichletFar { extent: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdGrid {
    /// number of spatial nodes, including both ends
    pub nx: usize,
    /// number of time steps
    pub nt: usize,
    pub t_end: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridReport {
    pub dx: f64,
    pub dt: f64,
    pub diffusion_number: f64,
    pub courant: f64,
    pub cell_peclet: f64,
}

impl FdGrid {
    pub fn new(nx: usize, nt: usize, t_end: f64) -> Self {
        Self { nx, nt, t_end }
    }

    pub fn report(&self, scenario: &Scenario, length: f64) -> GridReport {
        let p = &scenario.params;
        let dx = length / (self.nx - 1) as f64;
        let dt = (self.t_end - p.t0) / self.nt as f64;
        GridReport {
            dx,
            dt,
            diffusion_number: p.diffusivity() * dt / (dx * dx),
            courant: p.velocity / p.retardation * dt / dx,
            cell_peclet: p.velocity * dx / p.diffusion,
        }
    }
}

/// Every time level of a finite-difference run.
#[derive(Debug, Clone, PartialEq)]
pub struct FdSolution {
    pub xs: Vec<f64>,
    pub ts: Vec<f64>,
    pub levels: Vec<Vec<f64>>,
}

impl FdSolution {
    pub fn final_level(&self) -> &[f64] {
        &self.levels[self.levels.len() - 1]
    }

    /// Bilinear interpolation in `x` and `t`, clamped to the grid.
    pub fn eval(&self, x: f64, t: f64) -> f64 {
        let (i, fx) = locate(&self.xs, x);
        let (j, ft) = locate(&self.ts, t);
        let row = |j: usize| {
            let l = &self.levels[j];
            if i + 1 < l.len() {
                l[i] * (1.0 - fx) + l[i + 1] * fx
            } else {
                l[i]
            }
        };
        if j + 1 < self.levels.len() {
            row(j) * (1.0 - ft) + row(j + 1) * ft
        } else {
            row(j)
        }
    }
}

/// Uniform grid: cell index and fractional position of `v`.
fn locate(grid: &[f64], v: f64) -> (usize, f64) {
    let n = grid.len();
    if n == 1 || v <= grid[0] {
        return (0, 0.0);
    }
    if v >= grid[n - 1] {
        return (n - 1, 0.0);
    }
    let h = (grid[n - 1] - grid[0]) / (n - 1) as f64;
    let i = (((v - grid[0]) / h).floor() as usize).min(n - 2);
    (i, (v - grid[i]) / (grid[i + 1] - grid[i]))
}

/// Tridiagonal spatial operator `M` and source `b(t)` with
/// `C_t = M C + b(t)`; a `None` row marks a Dirichlet node.
struct Operator<'a> {
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
    source: Box<dyn Fn(f64) -> Result<Vec<f64>> + 'a>,
    dirichlet: Option<Box<dyn Fn(f64) -> f64 + 'a>>,
}

fn build_operator<'a>(scenario: &'a Scenario, exit: &'a ExitCondition, nx: usize, h: f64) -> Operator<'a> {
    let p = &scenario.params;
    let (rr, d, v, mu, gamma) = (p.retardation, p.diffusion, p.velocity, p.decay, p.production);
    let beta = v / d;
    let mut lower = vec![(d / (h * h) + v / (2.0 * h)) / rr; nx];
    let mut diag = vec![(-2.0 * d / (h * h) - mu) / rr; nx];
    let mut upper = vec![(d / (h * h) - v / (2.0 * h)) / rr; nx];
    let n = nx - 1;
    lower[0] = 0.0;
    upper[n] = 0.0;

    let inlet_robin = !matches!(exit, ExitCondition::DirichletFar { .. });
    // C_{-1} = C_1 - 2 h beta (C_0 - g)
    let inlet_gain = (2.0 * d * beta / h + v * beta) / rr;
    if inlet_robin {
        upper[0] = 2.0 * d / (h * h * rr);
        diag[0] = (-2.0 * d / (h * h) - 2.0 * d * beta / h - v * beta - mu) / rr;
    }
    // C_{N+1} = C_{N-1} + 2 h beta (C_N - C_E)
    let exit_gain = (-2.0 * d * beta / h + v * beta) / rr;
    lower[n] = 2.0 * d / (h * h * rr);
    diag[n] = match exit {
        ExitCondition::RobinTrace(_) => (-2.0 * d / (h * h) + 2.0 * d * beta / h - v * beta - mu) / rr,
        _ => (-2.0 * d / (h * h) - mu) / rr,
    };

    let base = gamma / rr;
    let source = move |t: f64| -> Result<Vec<f64>> {
        let mut b = vec![base; nx];
        if inlet_robin {
            b[0] += inlet_gain * scenario.inlet.value(t);
        }
        if let ExitCondition::RobinTrace(tr) = exit {
            b[n] += exit_gain * tr.value(t)?;
        }
        Ok(b)
    };
    let dirichlet: Option<Box<dyn Fn(f64) -> f64 + 'a>> = if inlet_robin {
        None
    } else {
        Some(Box::new(move |t: f64| scenario.inlet.value(t)))
    };
    Operator {
        lower,
        diag,
        upper,
        source: Box::new(source),
        dirichlet,
    }
}

impl Operator<'_> {
    fn apply(&self, c: &[f64], i: usize) -> f64 {
        let mut v = self.diag[i] * c[i];
        if i > 0 {
            v += self.lower[i] * c[i - 1];
        }
        if i + 1 < c.len() {
            v += self.upper[i] * c[i + 1];
        }
        v
    }

    /// One theta-step from `t` to `t + dt`.
    fn step(&self, c: &mut Vec<f64>, t: f64, dt: f64, theta: f64) -> Result<()> {
        let n = c.len();
        let b_old = (self.source)(t)?;
        let b_new = (self.source)(t + dt)?;
        let mut rhs: Vec<f64> = (0..n)
            .map(|i| c[i] + (1.0 - theta) * dt * (self.apply(c, i) + b_old[i]) + theta * dt * b_new[i])
            .collect();
        let mut lower: Vec<f64> = self.lower.iter().map(|l| -theta * dt * l).collect();
        let mut diag: Vec<f64> = self.diag.iter().map(|d| 1.0 - theta * dt * d).collect();
        let mut upper: Vec<f64> = self.upper.iter().map(|u| -theta * dt * u).collect();
        if let Some(ref g) = self.dirichlet {
            lower[0] = 0.0;
            diag[0] = 1.0;
            upper[0] = 0.0;
            rhs[0] = g(t + dt);
        }
        thomas(&lower, &diag, &upper, &mut rhs)?;
        *c = rhs;
        Ok(())
    }
}

/// Runs the scheme from `t0` to `grid.t_end`, storing every level.
pub fn fd_solve(scenario: &Scenario, grid: FdGrid, exit: &ExitCondition) -> Result<FdSolution> {
    let p = &scenario.params;
    if grid.nx < 3 || grid.nt < 1 {
        return Err(Error::InvalidSetting("grid needs nx >= 3 and nt >= 1".into()));
    }
    if !(grid.t_end > p.t0) {
        return Err(Error::InvalidSetting("t_end must exceed t0".into()));
    }
    let length = match exit {
        ExitCondition::DirichletFar { extent } => {
            if !(*extent >= 1.0) {
                return Err(Error::InvalidSetting("half-line extent must be >= 1".into()));
            }
            extent * p.length
        }
        _ => p.length,
    };
    let report = grid.report(scenario, length);
    if report.cell_peclet > 2.0 {
        return Err(Error::CellPecletTooLarge(report.cell_peclet));
    }
    let h = report.dx;
    let dt = report.dt;
    let xs: Vec<f64> = (0..grid.nx).map(|i| i as f64 * h).collect();
    let ts: Vec<f64> = (0..=grid.nt).map(|k| p.t0 + k as f64 * dt).collect();
    let initial: Vec<f64> = match exit {
        ExitCondition::DirichletFar { .. } => xs.iter().map(|&x| scenario.initial_flux_mid(x)).collect(),
        _ => xs.iter().map(|&x| scenario.initial.value(x)).collect(),
    };
    let op = build_operator(scenario, exit, grid.nx, h);

    let mut levels = Vec::with_capacity(grid.nt + 1);
    levels.push(initial.clone());
    let mut c = initial;
    for (k, &t) in ts.iter().take(grid.nt).enumerate() {
        if k < STARTUP_STEPS {
            op.step(&mut c, t, 0.5 * dt, 1.0)?;
            op.step(&mut c, t + 0.5 * dt, 0.5 * dt, 1.0)?;
        } else {
            op.step(&mut c, t, dt, 0.5)?;
        }
        levels.push(c.clone());
    }
    Ok(FdSolution { xs, ts, levels })
}

/// Observed convergence ratio `|u_h - u_{h/2}| / |u_{h/2} - u_{h/4}|` in
/// the max norm at the final time, refining space and time together
/// from `coarse`.
pub fn richardson_ratio(scenario: &Scenario, coarse: FdGrid, exit: &ExitCondition) -> Result<f64> {
    let grids = [1usize, 2, 4].map(|f| FdGrid::new((coarse.nx - 1) * f + 1, coarse.nt * f, coarse.t_end));
    let runs = grids
        .iter()
        .map(|g| fd_solve(scenario, *g, exit))
        .collect::<Result<Vec<_>>>()?;
    let coarse_final = runs[0].final_level();
    let diff = |fine: &FdSolution, step: usize, base: &[f64]| {
        base.iter()
            .enumerate()
            .map(|(i, v)| (v - fine.final_level()[i * step]).abs())
            .fold(0.0, f64::max)
    };
    let d1 = diff(&runs[1], 2, coarse_final);
    let mid_on_coarse: Vec<f64> = (0..coarse.nx).map(|i| runs[1].final_level()[2 * i]).collect();
    let d2 = diff(&runs[2], 4, &mid_on_coarse);
    Ok(d1 / d2)
}
