//! Reference computations shared by the integration tests. Nothing here
//! calls into the library's numerics.

#![allow(dead_code)]

use std::f64::consts::PI;

use cde::model::{PhysicalParams, ScalarFn, Scenario};

/// Composite Simpson rule on `2m` intervals.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, m: usize) -> f64 {
    let n = 2 * m;
    let h = (b - a) / n as f64;
    let mut sum = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * f(a + h * i as f64);
    }
    sum * h / 3.0
}

/// `cos(kx) + (r/k) sin(kx)`, the positive-index eigenfunction shape.
pub fn phi_ref(k: f64, r: f64, x: f64) -> f64 {
    (k * x).cos() + r / k * (k * x).sin()
}

pub fn dphi_ref(k: f64, r: f64, x: f64) -> f64 {
    -k * (k * x).sin() + r * (k * x).cos()
}

/// Root of `phi'(ell) + r phi(ell) = 0` in `(lo, hi)` by plain bisection.
pub fn danckwerts_root(r: f64, ell: f64, lo: f64, hi: f64) -> f64 {
    let f = |k: f64| dphi_ref(k, r, ell) + r * phi_ref(k, r, ell);
    let (mut a, mut b) = (lo, hi);
    let fa = f(a);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        if (f(m) < 0.0) == (fa < 0.0) {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// Unit column with `R = D = v = ell = 1`.
pub fn generic_params() -> PhysicalParams {
    PhysicalParams {
        retardation: 1.0,
        diffusion: 1.0,
        velocity: 1.0,
        decay: 0.1,
        production: 0.05,
        length: 1.0,
        t0: 0.0,
    }
}

/// `g = 1`, `phi = 0` on the unit column.
pub fn generic_scenario() -> Scenario {
    Scenario::new(generic_params(), ScalarFn::constant(1.0), ScalarFn::constant(0.0)).unwrap()
}

pub fn heat_kernel(x: f64, t: f64) -> f64 {
    (-x * x / (4.0 * t)).exp() / (4.0 * PI * t).sqrt()
}
