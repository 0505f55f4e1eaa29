//! Eigenbases of `phi'' + lambda phi = 0` on `[0, ell]` with
//! `phi'(0) = r phi(0)` and either `phi'(ell) = r phi(ell)` (Robin family)
//! or `phi'(ell) = -r phi(ell)` (Danckwerts family).
//!
//! The Robin family has closed-form eigenvalues `n^2 pi^2 / ell^2` plus the
//! single negative mode `e^{rx}` with eigenvalue `-r^2`. The Danckwerts
//! eigenvalues are the roots of
//!
//! ```text
//! (k^2 - r^2) sin(k ell) - 2 r k cos(k ell) = 0,   lambda = k^2,
//! ```
//!
//! one in each interval `(n pi / ell, (n + 1) pi / ell)` for `n = 0, 1, ...`.
//! Both families use `phi_n(x) = cos(kx) + (r/k) sin(kx)` for `lambda > 0`.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::Simpson;

/// Default truncation of the eigenfunction expansion.
pub const DEFAULT_MODES: usize = 64;

pub const ROOT_REL_TOL: f64 = 1e-13;
pub const NORM_REL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryKind {
    Robin,
    Danckwerts,
}

impl BoundaryKind {
    pub fn as_str(self) -> &'static str {
        match self {
            BoundaryKind::Robin => "robin",
            BoundaryKind::Danckwerts => "danckwerts",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenPair {
    pub n: usize,
    pub lambda: f64,
    /// `sqrt(lambda)`; for the negative Robin mode this is the growth rate `r`
    /// of `e^{rx}`.
    pub k: f64,
    pub norm_sq: f64,
    /// Interval of `lambda` that the eigenvalue is known to lie in.
    pub bracket: (f64, f64),
}

impl EigenPair {
    pub fn is_negative_mode(&self) -> bool {
        self.lambda < 0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenBasis {
    pub kind: BoundaryKind,
    pub r: f64,
    pub ell: f64,
    pub pairs: Vec<EigenPair>,
}

pub fn build_basis(kind: BoundaryKind, r: f64, ell: f64, count: usize) -> Result<EigenBasis> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::NonPositiveParam("r".into()));
    }
    if !(ell > 0.0) || !ell.is_finite() {
        return Err(Error::NonPositiveParam("ell".into()));
    }
    if count == 0 {
        return Err(Error::InvalidSetting("basis needs at least one mode".into()));
    }
    let pairs = (0..count)
        .into_par_iter()
        .map(|n| build_pair(kind, n, r, ell))
        .collect::<Result<Vec<_>>>()?;
    Ok(EigenBasis { kind, r, ell, pairs })
}

fn build_pair(kind: BoundaryKind, n: usize, r: f64, ell: f64) -> Result<EigenPair> {
    let step = PI / ell;
    let (lambda, k, bracket) = match kind {
        BoundaryKind::Robin if n == 0 => (-r * r, r, (-r * r, -r * r)),
        BoundaryKind::Robin => {
            let k = n as f64 * step;
            (k * k, k, (k * k, k * k))
        }
        BoundaryKind::Danckwerts => {
            let k = danckwerts_k(n, r, ell)?;
            let lo = n as f64 * step;
            let hi = (n + 1) as f64 * step;
            (k * k, k, (lo * lo, hi * hi))
        }
    };
    let mut pair = EigenPair {
        n,
        lambda,
        k,
        norm_sq: 0.0,
        bracket,
    };
    pair.norm_sq = eval_norm_sq(kind, &pair, r, ell)?;
    Ok(pair)
}

/// Danckwerts eigenvalue with index `n`, the unique root with
/// `sqrt(lambda)` in `(n pi / ell, (n + 1) pi / ell)`.
pub fn danckwerts_lambda(n: usize, r: f64, ell: f64) -> Result<f64> {
    danckwerts_k(n, r, ell).map(|k| k * k)
}

/// Characteristic function divided by `k`, so that it is regular at `k = 0`
/// and keeps the sign of the tangent-free form for `k > 0`.
pub fn danckwerts_characteristic(k: f64, r: f64, ell: f64) -> f64 {
    let z = k * ell;
    let sinc = if z.abs() < 1e-8 {
        1.0 - z * z / 6.0
    } else {
        z.sin() / z
    };
    (k * k - r * r) * ell * sinc - 2.0 * r * z.cos()
}

fn danckwerts_k(n: usize, r: f64, ell: f64) -> Result<f64> {
    let f = |k: f64| danckwerts_characteristic(k, r, ell);
    // derivative of k * h(k), used for Newton on the undivided form
    let full = |k: f64| (k * k - r * r) * (k * ell).sin() - 2.0 * r * k * (k * ell).cos();
    let dfull = |k: f64| {
        let (s, c) = (k * ell).sin_cos();
        2.0 * k * s + (k * k - r * r) * ell * c - 2.0 * r * c + 2.0 * r * k * ell * s
    };

    let mut lo = n as f64 * PI / ell;
    let mut hi = (n + 1) as f64 * PI / ell;
    let mut f_lo = f(lo);
    let f_hi = f(hi);
    if f_lo == 0.0 && n > 0 {
        // tiny r: the root sits on the bracket edge to working precision
        return Ok(lo);
    }
    if f_lo * f_hi >= 0.0 {
        return Err(Error::RootNotBracketed(n));
    }
    while hi - lo > 1e-6 * hi {
        let mid = 0.5 * (lo + hi);
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if (f_mid < 0.0) == (f_lo < 0.0) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    let mut k = 0.5 * (lo + hi);
    for _ in 0..50 {
        let d = dfull(k);
        let step = if d != 0.0 { full(k) / d } else { f64::NAN };
        let next = k - step;
        if next.is_finite() && next > lo && next < hi {
            // shrink the bracket with the Newton iterate's sign
            let fk = f(k);
            if (fk < 0.0) == (f_lo < 0.0) {
                lo = k;
                f_lo = fk;
            } else {
                hi = k;
            }
            k = next;
            if step.abs() <= ROOT_REL_TOL * k {
                return Ok(k);
            }
        } else {
            let mid = 0.5 * (lo + hi);
            let f_mid = f(mid);
            if (f_mid < 0.0) == (f_lo < 0.0) {
                lo = mid;
                f_lo = f_mid;
            } else {
                hi = mid;
            }
            k = 0.5 * (lo + hi);
            if hi - lo <= ROOT_REL_TOL * k {
                return Ok(k);
            }
        }
    }
    Ok(k)
}

/// `∫_0^ell phi_n^2 dx`.
///
/// Robin modes use closed forms; Danckwerts modes use adaptive quadrature
/// because `k ell` is not a multiple of pi there.
pub fn eval_norm_sq(kind: BoundaryKind, pair: &EigenPair, r: f64, ell: f64) -> Result<f64> {
    match kind {
        BoundaryKind::Robin if pair.is_negative_mode() => Ok((2.0 * r * ell).exp_m1() / (2.0 * r)),
        BoundaryKind::Robin => Ok(0.5 * ell * (1.0 + r * r / pair.lambda)),
        BoundaryKind::Danckwerts => {
            let k = pair.k;
            let phi = |x: f64| {
                let v = (k * x).cos() + r / k * (k * x).sin();
                v * v
            };
            Simpson::with_rel_tol(NORM_REL_TOL)
                .panels(8 + 2 * pair.n)
                .integrate(phi, 0.0, ell)
                .map_err(|_| Error::QuadratureNotConverged {
                    mode: pair.n,
                    which: "norm",
                })
        }
    }
}

impl EigenBasis {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Index of the first mode in the expansion.
    pub fn start_index(&self) -> usize {
        0
    }

    /// `phi_n` (order 0) or its first or second derivative at `x`, where
    /// `idx` is the position in `pairs`.
    pub fn eval_phi(&self, idx: usize, x: f64, order: u8) -> f64 {
        eval_mode(&self.pairs[idx], self.r, x, order)
    }

    /// Residuals of the two boundary conditions for mode `idx`, scaled by
    /// `max(|phi|, |phi'|/k)` over the endpoints.
    pub fn boundary_residual(&self, idx: usize) -> f64 {
        let r = self.r;
        let ell = self.ell;
        let p0 = self.eval_phi(idx, 0.0, 0);
        let d0 = self.eval_phi(idx, 0.0, 1);
        let pl = self.eval_phi(idx, ell, 0);
        let dl = self.eval_phi(idx, ell, 1);
        let exit_sign = match self.kind {
            BoundaryKind::Robin => -1.0,
            BoundaryKind::Danckwerts => 1.0,
        };
        let k = self.pairs[idx].k.abs().max(r);
        let scale = p0.abs().max(pl.abs()).max(d0.abs() / k).max(dl.abs() / k);
        let res = (d0 - r * p0)
            .abs()
            .max((dl + exit_sign * r * pl).abs() / k.max(1.0));
        res / scale
    }
}

pub(crate) fn eval_mode(pair: &EigenPair, r: f64, x: f64, order: u8) -> f64 {
    if pair.is_negative_mode() {
        let e = (r * x).exp();
        return match order {
            0 => e,
            1 => r * e,
            _ => r * r * e,
        };
    }
    let k = pair.k;
    let (s, c) = (k * x).sin_cos();
    match order {
        0 => c + r / k * s,
        1 => -k * s + r * c,
        _ => -pair.lambda * (c + r / k * s),
    }
}
