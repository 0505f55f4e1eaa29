//! Analytical solution of the one-dimensional transport equation
//! `R C_t = D C_xx - v C_x - mu C + gamma` on `0 < x < ell` with flux
//! (Robin) conditions at both ends, together with the half-line exit
//! concentration problem, the Neumann-exit (Danckwerts) variant and
//! independent numerical oracles.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod eigen;
pub mod error;
pub mod exit;
pub mod linalg;
pub mod model;
pub mod oracle;
pub mod quad;
pub mod series;
pub mod spline;

pub use error::{Error, Result};
