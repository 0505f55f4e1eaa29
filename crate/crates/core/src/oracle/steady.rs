//! Closed-form steady states of the transport equation on `[0, ell]`.
//!
//! `C(x) = gamma/mu + A e^{m+ (x - ell)} + B e^{m- x}` with
//! `m± = (v ± sqrt(v^2 + 4 D mu)) / (2D)`. Anchoring the growing exponential
//! at `ell` keeps both terms bounded by their coefficients on long domains.

use crate::error::{Error, Result};
use crate::linalg::solve_2x2;
use crate::model::PhysicalParams;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SteadyExit {
    /// `v C - D C_x = v c_e` at `ell`.
    Robin(f64),
    /// `C_x = 0` at `ell`.
    Neumann,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadySolution {
    pub equilibrium: f64,
    pub a: f64,
    pub b: f64,
    pub m_plus: f64,
    pub m_minus: f64,
    pub ell: f64,
}

impl SteadySolution {
    pub fn eval(&self, x: f64) -> f64 {
        self.equilibrium + self.a * (self.m_plus * (x - self.ell)).exp() + self.b * (self.m_minus * x).exp()
    }

    pub fn eval_dx(&self, x: f64) -> f64 {
        self.a * self.m_plus * (self.m_plus * (x - self.ell)).exp()
            + self.b * self.m_minus * (self.m_minus * x).exp()
    }
}

/// Steady solution with inlet flux condition `v C - D C_x = v g` at 0.
pub fn steady_bvp(params: &PhysicalParams, g: f64, exit: SteadyExit) -> Result<SteadySolution> {
    params.validate()?;
    let (d, v, mu) = (params.diffusion, params.velocity, params.decay);
    let ell = params.length;
    let eq = params.equilibrium();
    let root = (v * v + 4.0 * d * mu).sqrt();
    let m_plus = (v + root) / (2.0 * d);
    // rationalised to avoid cancellation for small mu
    let m_minus = -2.0 * mu / (v + root);
    let decay_p = (-m_plus * ell).exp();
    let grow_m = (m_minus * ell).exp();
    // v - D m± = D m∓
    let inlet = [decay_p * d * m_minus, d * m_plus];
    let (exit_row, exit_rhs) = match exit {
        SteadyExit::Robin(c_e) => ([d * m_minus, grow_m * d * m_plus], v * (c_e - eq)),
        SteadyExit::Neumann => ([m_plus, m_minus * grow_m], 0.0),
    };
    let [a, b] = solve_2x2([inlet, exit_row], [v * (g - eq), exit_rhs]).ok_or(Error::SingularSystem)?;
    Ok(SteadySolution {
        equilibrium: eq,
        a,
        b,
        m_plus,
        m_minus,
        ell,
    })
}
