//! Adaptive Simpson quadrature with Richardson correction.
//!
//! The interval is first cut into a fixed number of panels; the sum of the
//! Simpson estimates of `|f|` over those panels sets the error scale, so a
//! relative tolerance stays meaningful when the integral itself cancels to
//! (near) zero. Each panel is then refined independently with a tolerance
//! proportional to its width.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NotConverged {
    pub a: f64,
    pub b: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct Simpson {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_depth: u32,
    pub panels: usize,
}

impl Default for Simpson {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 0.0,
            max_depth: 30,
            panels: 8,
        }
    }
}

impl Simpson {
    pub fn with_rel_tol(rel_tol: f64) -> Self {
        Self {
            rel_tol,
            ..Self::default()
        }
    }

    pub fn panels(mut self, panels: usize) -> Self {
        self.panels = panels.max(1);
        self
    }

    pub fn integrate<F>(&self, f: F, a: f64, b: f64) -> Result<f64, NotConverged>
    where
        F: Fn(f64) -> f64,
    {
        if a == b {
            return Ok(0.0);
        }
        if b < a {
            return self.integrate(f, b, a).map(|v| -v);
        }
        let m = self.panels.max(1);
        let width = (b - a) / m as f64;
        let node = |i: usize| if i == 2 * m { b } else { a + 0.5 * width * i as f64 };
        let fx: Vec<f64> = (0..=2 * m).map(|i| f(node(i))).collect();

        let mut scale = 0.0;
        let mut estimates = Vec::with_capacity(m);
        for p in 0..m {
            let (f0, f1, f2) = (fx[2 * p], fx[2 * p + 1], fx[2 * p + 2]);
            estimates.push(width / 6.0 * (f0 + 4.0 * f1 + f2));
            scale += width / 6.0 * (f0.abs() + 4.0 * f1.abs() + f2.abs());
        }
        let target = (self.rel_tol * scale).max(self.abs_tol);

        let mut total = 0.0;
        for p in 0..m {
            let lo = node(2 * p);
            let hi = node(2 * p + 2);
            let panel = Panel {
                a: lo,
                m: node(2 * p + 1),
                b: hi,
                fa: fx[2 * p],
                fm: fx[2 * p + 1],
                fb: fx[2 * p + 2],
                whole: estimates[p],
            };
            total += refine(&f, panel, target / m as f64, target, self.max_depth)?;
        }
        Ok(total)
    }
}

#[derive(Clone, Copy)]
struct Panel {
    a: f64,
    m: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
}

/// `budget` is the tolerance of the whole integral; a panel that reaches
/// the depth cap may still use it, which lets isolated jumps converge.
fn refine<F: Fn(f64) -> f64>(
    f: &F,
    p: Panel,
    tol: f64,
    budget: f64,
    depth: u32,
) -> Result<f64, NotConverged> {
    let lm = 0.5 * (p.a + p.m);
    let rm = 0.5 * (p.m + p.b);
    let (flm, frm) = (f(lm), f(rm));
    let left = (p.m - p.a) / 6.0 * (p.fa + 4.0 * flm + p.fm);
    let right = (p.b - p.m) / 6.0 * (p.fm + 4.0 * frm + p.fb);
    let delta = left + right - p.whole;
    // rounding floor: once the estimates agree to a few ulps there is nothing left to gain
    let floor = 32.0 * f64::EPSILON * (left.abs() + right.abs());
    if delta.abs() <= 15.0 * tol.max(floor) {
        return Ok(left + right + delta / 15.0);
    }
    if depth == 0 || lm <= p.a || rm >= p.b {
        if delta.abs() <= 15.0 * budget {
            return Ok(left + right + delta / 15.0);
        }
        return Err(NotConverged { a: p.a, b: p.b });
    }
    let l = Panel {
        a: p.a,
        m: lm,
        b: p.m,
        fa: p.fa,
        fm: flm,
        fb: p.fm,
        whole: left,
    };
    let r = Panel {
        a: p.m,
        m: rm,
        b: p.b,
        fa: p.fm,
        fm: frm,
        fb: p.fb,
        whole: right,
    };
    Ok(refine(f, l, 0.5 * tol, budget, depth - 1)? + refine(f, r, 0.5 * tol, budget, depth - 1)?)
}

/// Composite trapezoid rule on `n` uniform intervals. Used as an
/// independent low-order cross-check.
pub fn trapezoid<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let interior: f64 = (1..n).map(|i| f(a + h * i as f64)).sum();
    h * (0.5 * (f(a) + f(b)) + interior)
}
