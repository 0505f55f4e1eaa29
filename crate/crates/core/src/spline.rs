//! Clamped cubic spline with constant-hold extrapolation.

use crate::error::{Error, Result};
use crate::linalg::thomas;

#[derive(Debug, Clone, PartialEq)]
pub struct CubicSpline {
    x: Vec<f64>,
    y: Vec<f64>,
    /// second derivatives at the knots
    m: Vec<f64>,
}

impl CubicSpline {
    /// Spline with prescribed end slopes `d0` and `d1`.
    pub fn clamped(x: Vec<f64>, y: Vec<f64>, d0: f64, d1: f64) -> Result<Self> {
        if x.is_empty() || x.len() != y.len() {
            return Err(Error::EmptyTable);
        }
        if x.iter().chain(&y).any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteParam("table".into()));
        }
        if x.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::UnsortedTable);
        }
        let n = x.len();
        if n == 1 {
            return Ok(Self { x, y, m: vec![0.0] });
        }
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let slope: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();
        let mut lower = vec![0.0; n];
        let mut diag = vec![0.0; n];
        let mut upper = vec![0.0; n];
        let mut rhs = vec![0.0; n];
        diag[0] = 2.0 * h[0];
        upper[0] = h[0];
        rhs[0] = 6.0 * (slope[0] - d0);
        for i in 1..n - 1 {
            lower[i] = h[i - 1];
            diag[i] = 2.0 * (h[i - 1] + h[i]);
            upper[i] = h[i];
            rhs[i] = 6.0 * (slope[i] - slope[i - 1]);
        }
        lower[n - 1] = h[n - 2];
        diag[n - 1] = 2.0 * h[n - 2];
        rhs[n - 1] = 6.0 * (d1 - slope[n - 2]);
        thomas(&lower, &diag, &upper, &mut rhs)?;
        Ok(Self { x, y, m: rhs })
    }

    /// Clamped spline whose end slopes are estimated from the three
    /// samples nearest each end (one-sided quadratic fit).
    pub fn with_estimated_ends(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        let n = x.len();
        let (d0, d1) = if n >= 3 {
            (
                quadratic_slope(&x[..3], &y[..3], x[0]),
                quadratic_slope(&x[n - 3..], &y[n - 3..], x[n - 1]),
            )
        } else if n == 2 {
            let s = (y[1] - y[0]) / (x[1] - x[0]);
            (s, s)
        } else {
            (0.0, 0.0)
        };
        Self::clamped(x, y, d0, d1)
    }

    pub fn knots(&self) -> &[f64] {
        &self.x
    }

    pub fn values(&self) -> &[f64] {
        &self.y
    }

    pub fn first(&self) -> f64 {
        self.x[0]
    }

    pub fn last(&self) -> f64 {
        self.x[self.x.len() - 1]
    }

    /// Derivative of order 0, 1 or 2; zero derivatives outside the knot span.
    pub fn eval(&self, t: f64, order: u8) -> f64 {
        let n = self.x.len();
        if n == 1 || t < self.x[0] || t > self.x[n - 1] {
            if order > 0 {
                return 0.0;
            }
            return if t >= self.x[n - 1] {
                self.y[n - 1]
            } else {
                self.y[0]
            };
        }
        let i = (self.x.partition_point(|&k| k <= t) - 1).min(n - 2);
        let h = self.x[i + 1] - self.x[i];
        let a = (self.x[i + 1] - t) / h;
        let b = (t - self.x[i]) / h;
        let (m0, m1) = (self.m[i], self.m[i + 1]);
        match order {
            0 => {
                a * self.y[i]
                    + b * self.y[i + 1]
                    + ((a * a * a - a) * m0 + (b * b * b - b) * m1) * h * h / 6.0
            }
            1 => {
                (self.y[i + 1] - self.y[i]) / h - (3.0 * a * a - 1.0) * h * m0 / 6.0
                    + (3.0 * b * b - 1.0) * h * m1 / 6.0
            }
            _ => a * m0 + b * m1,
        }
    }
}

fn quadratic_slope(x: &[f64], y: &[f64], at: f64) -> f64 {
    // derivative of the Lagrange interpolant through three points
    let (x0, x1, x2) = (x[0], x[1], x[2]);
    let l0 = ((at - x1) + (at - x2)) / ((x0 - x1) * (x0 - x2));
    let l1 = ((at - x0) + (at - x2)) / ((x1 - x0) * (x1 - x2));
    let l2 = ((at - x0) + (at - x1)) / ((x2 - x0) * (x2 - x1));
    y[0] * l0 + y[1] * l1 + y[2] * l2
}
