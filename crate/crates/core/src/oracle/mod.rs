//! Independent checks: finite differences, closed-form steady states and a
//! PDE residual probe. None of this shares code with the series solver.

pub mod fd;
pub mod residual;
pub mod steady;

pub use fd::{fd_solve, richardson_ratio, ExitCondition, FdGrid, FdSolution, GridReport};
pub use residual::{residual_check, ResidualStats};
pub use steady::{steady_bvp, SteadyExit, SteadySolution};

use serde::{Deserialize, Serialize};

/// Which oracle stands in for the series solution.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OracleKind {
    /// Crank-Nicolson on `[0, ell]`
    #[default]
    Fd,
    /// closed-form steady state (constant inlet only)
    Steady,
}

impl OracleKind {
    pub fn as_str(self) -> &'static str {
        match self {
            OracleKind::Fd => "fd",
            OracleKind::Steady => "steady",
        }
    }
}
