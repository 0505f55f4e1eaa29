//! Pointwise residual of `R C_t - D C_xx + v C_x + mu C - gamma` by
//! fourth-order central differences.

use crate::error::Result;
use crate::model::PhysicalParams;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualStats {
    pub max: f64,
    pub rms: f64,
    pub count: usize,
    /// `(x, t)` of the largest residual
    pub argmax: (f64, f64),
}

fn d1(f: [f64; 5], h: f64) -> f64 {
    (f[0] - 8.0 * f[1] + 8.0 * f[3] - f[4]) / (12.0 * h)
}

fn d2(f: [f64; 5], h: f64) -> f64 {
    (-f[0] + 16.0 * f[1] - 30.0 * f[2] + 16.0 * f[3] - f[4]) / (12.0 * h * h)
}

/// Residual statistics of `field` at `points`, with steps `hx` and `ht`.
/// The field is evaluated up to two steps away from each point.
pub fn residual_check<F>(
    field: F,
    params: &PhysicalParams,
    points: &[(f64, f64)],
    hx: f64,
    ht: f64,
) -> Result<ResidualStats>
where
    F: Fn(f64, f64) -> Result<f64>,
{
    let mut max: f64 = 0.0;
    let mut argmax = (f64::NAN, f64::NAN);
    let mut sum_sq = 0.0;
    for &(x, t) in points {
        let mut fx = [0.0; 5];
        let mut ft = [0.0; 5];
        for j in 0..5 {
            let k = j as f64 - 2.0;
            fx[j] = field(x + k * hx, t)?;
            ft[j] = if j == 2 { fx[2] } else { field(x, t + k * ht)? };
        }
        let res = params.retardation * d1(ft, ht) - params.diffusion * d2(fx, hx)
            + params.velocity * d1(fx, hx)
            + params.decay * fx[2]
            - params.production;
        if res.abs() > max {
            max = res.abs();
            argmax = (x, t);
        }
        sum_sq += res * res;
    }
    let count = points.len();
    Ok(ResidualStats {
        max,
        rms: if count > 0 {
            (sum_sq / count as f64).sqrt()
        } else {
            0.0
        },
        count,
        argmax,
    })
}
