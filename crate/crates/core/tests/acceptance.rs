//! Acceptance suite: one PASS/FAIL line per criterion, each with its
//! runtime budget. Exits non-zero if anything fails.

mod common;

use std::f64::consts::PI;
use std::fs;
use std::process::Command;
use std::time::{Duration, Instant};

use cde::eigen::{build_basis, BoundaryKind};
use cde::exit::{exit_trace, kernel, steady_exit_value, ExitTrace, KernelOrder, Provenance};
use cde::model::{derive_transform, ExitMode, PhysicalParams, ScalarFn, Scenario};
use cde::oracle::{
    fd_solve, residual_check, richardson_ratio, steady_bvp, ExitCondition, FdGrid, SteadyExit,
};
use cde::series::{solve, solve_large_t, ForcingSpec, SolutionField, SolveMode};
use common::{generic_params, generic_scenario, heat_kernel, simpson};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome, Duration);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn uniform(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

/// Interior comparison times of the generic window, `t0` excluded.
fn window_times() -> Vec<f64> {
    (1..=20).map(|k| 0.1 * k as f64).collect()
}

fn robin_field(scenario: &Scenario, trace: &ExitTrace, modes: usize) -> SolutionField {
    solve(
        ForcingSpec::robin(scenario, trace.clone()),
        modes,
        SolveMode::InitialValue,
    )
    .unwrap()
}

// ---------------------------------------------------------------------------

fn eigen_structure() -> Outcome {
    let n = 20;
    let mut worst_robin: f64 = 0.0;
    let mut worst_orth: f64 = 0.0;
    let mut violations = Vec::new();
    for ell in [0.5, 1.0, 2.0] {
        for r in [0.5, 1.0, 2.0] {
            let robin = build_basis(BoundaryKind::Robin, r, ell, n).map_err(|e| e.to_string())?;
            let danck = build_basis(BoundaryKind::Danckwerts, r, ell, n).map_err(|e| e.to_string())?;
            for i in 0..n {
                let exact = if i == 0 {
                    -r * r
                } else {
                    (i as f64 * PI / ell).powi(2)
                };
                worst_robin = worst_robin.max((robin.pairs[i].lambda - exact).abs() / exact.abs());
                let lo = (i as f64 * PI / ell).powi(2);
                let hi = ((i + 1) as f64 * PI / ell).powi(2);
                let l = danck.pairs[i].lambda;
                if !(lo < l && l < hi && robin.pairs[i].lambda < l) {
                    violations.push(format!("ell={ell} r={r} n={i}"));
                }
            }
            for basis in [&robin, &danck] {
                for i in 0..n {
                    for j in 0..i {
                        let ip = simpson(
                            |x| basis.eval_phi(i, x, 0) * basis.eval_phi(j, x, 0),
                            0.0,
                            ell,
                            4000,
                        );
                        let scale = (basis.pairs[i].norm_sq * basis.pairs[j].norm_sq).sqrt();
                        worst_orth = worst_orth.max(ip.abs() / scale);
                    }
                }
            }
        }
    }
    check(
        worst_robin < 1e-12 && violations.is_empty() && worst_orth < 1e-8,
        format!(
            "robin rel err {worst_robin:.2e}, bracket violations {}, orthogonality {worst_orth:.2e}",
            violations.len()
        ),
    )
}

fn transform_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let p = PhysicalParams {
            retardation: rng.gen_range(0.1..10.0),
            diffusion: rng.gen_range(1e-3..10.0),
            velocity: rng.gen_range(1e-3..10.0),
            decay: rng.gen_range(0.0..5.0),
            production: 0.0,
            length: 1.0,
            t0: 0.0,
        };
        let t = derive_transform(&p);
        let gap = t.s - p.diffusion / p.retardation * t.r * t.r - p.decay / p.retardation;
        worst = worst.max(gap.abs() / (f64::EPSILON * t.s));
    }
    check(
        worst <= 4.0,
        format!("max |s - a r^2 - mu/R| = {worst:.2} ulp(s) over 1000 draws"),
    )
}

fn equilibrium() -> Outcome {
    let p = generic_params();
    let eq = p.equilibrium();
    let base = Scenario::new(p, ScalarFn::constant(eq), ScalarFn::constant(eq)).unwrap();
    let measured = base.clone().with_exit(ExitMode::Measured(
        ExitTrace::constant(eq, Provenance::Measured).unwrap(),
    ));
    let xs = uniform(0.0, p.length, 51);
    let ts = uniform(0.0, 2.0, 21);
    let computed = exit_trace(&base, (0.0, 2.0), 64).map_err(|e| e.to_string())?;
    let trace_err = ts
        .iter()
        .map(|&t| (computed.value(t).unwrap() - eq).abs())
        .chain(computed.values().iter().map(|c| (c - eq).abs()))
        .fold(0.0, f64::max);

    let mut worst: f64 = 0.0;
    let runs = [
        (measured.clone(), SolveMode::InitialValue),
        (measured, SolveMode::LargeT),
        (base.clone(), SolveMode::InitialValue),
    ];
    for (scenario, mode) in runs {
        let trace = match scenario.exit {
            ExitMode::Measured(ref tr) => tr.clone(),
            ExitMode::Computed => computed.clone(),
        };
        let field = solve(ForcingSpec::robin(&scenario, trace), 64, mode).map_err(|e| e.to_string())?;
        let grid = field.sample(&xs, &ts).map_err(|e| e.to_string())?;
        worst = worst.max(grid.iter().flatten().map(|c| (c - eq).abs()).fold(0.0, f64::max));
    }
    check(
        worst < 1e-5 && trace_err < 1e-6,
        format!("max |C - gamma/mu| = {worst:.2e}, exit trace error {trace_err:.2e}"),
    )
}

fn oracle_triangle() -> Outcome {
    let s = generic_scenario();
    let ell = s.params.length;
    // the residual stencil reaches slightly past the end of the window
    let trace = exit_trace(&s, (0.0, 2.01), 64).map_err(|e| e.to_string())?;
    let field = robin_field(&s, &trace, 64);
    let xs = uniform(0.0, ell, 51);
    let ts = window_times();
    let series = field.sample(&xs, &ts).map_err(|e| e.to_string())?;

    let fd = fd_solve(
        &s,
        FdGrid::new(401, 2001, 2.0),
        &ExitCondition::RobinTrace(trace.clone()),
    )
    .map_err(|e| e.to_string())?;
    let (mut diff, mut scale) = (0.0f64, 0.0f64);
    for (k, &t) in ts.iter().enumerate() {
        for (i, &x) in xs.iter().enumerate() {
            let c = fd.eval(x, t);
            diff = diff.max((series[k][i] - c).abs());
            scale = scale.max(c.abs());
        }
    }
    let series_vs_fd = diff / scale;

    let half = fd_solve(
        &s,
        FdGrid::new(4001, 2001, 2.0),
        &ExitCondition::DirichletFar { extent: 10.0 },
    )
    .map_err(|e| e.to_string())?;
    let (mut d, mut m) = (0.0f64, 0.0f64);
    for &t in &ts {
        let c = half.eval(ell, t);
        d = d.max((trace.value(t).unwrap() - c).abs());
        m = m.max(c.abs());
    }
    let trace_vs_fd = d / m;

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let h = 1e-4 * ell;
    let ht = 1e-4;
    let points: Vec<(f64, f64)> = (0..50)
        .map(|_| (rng.gen_range(2.0 * h..ell - 2.0 * h), rng.gen_range(1e-3..2.0)))
        .collect();
    let res =
        residual_check(|x, t| field.eval(x, t), &s.params, &points, h, ht).map_err(|e| e.to_string())?;
    let mut max_c: f64 = 0.0;
    let mut max_cx: f64 = 0.0;
    for t in uniform(1e-3, 2.0, 21) {
        let slice = field.slice(t).map_err(|e| e.to_string())?;
        for &x in &xs {
            max_c = max_c.max(field.eval_at(&slice, x).unwrap().abs());
            max_cx = max_cx.max(field.eval_dx_at(&slice, x).unwrap().abs());
        }
    }
    let p = &s.params;
    let bound = 1e-3 * p.production.abs().max(p.decay * max_c).max(p.velocity * max_cx);
    check(
        series_vs_fd < 1e-3 && trace_vs_fd < 2e-3 && res.max < bound,
        format!(
            "series vs FD {series_vs_fd:.2e}, trace vs half-line FD {trace_vs_fd:.2e}, \
             residual {:.2e} (bound {bound:.2e}, at x={:.3} t={:.3})",
            res.max, res.argmax.0, res.argmax.1
        ),
    )
}

fn steady_closure() -> Outcome {
    let p = PhysicalParams {
        t0: -5.0,
        ..generic_params()
    };
    let s = Scenario::new(p, ScalarFn::constant(1.0), ScalarFn::constant(0.0)).unwrap();
    let xs = uniform(0.0, p.length, 21);
    let mut worst_rel: f64 = 0.0;
    let mut worst_drift: f64 = 0.0;
    for kind in [BoundaryKind::Robin, BoundaryKind::Danckwerts] {
        let (forcing, exit) = match kind {
            BoundaryKind::Robin => {
                let ce = steady_exit_value(&s).map_err(|e| e.to_string())?;
                let tr = ExitTrace::constant(ce, Provenance::Computed).unwrap();
                (ForcingSpec::robin(&s, tr), SteadyExit::Robin(ce))
            }
            BoundaryKind::Danckwerts => (ForcingSpec::danckwerts(&s), SteadyExit::Neumann),
        };
        let field = solve_large_t(forcing, 64).map_err(|e| e.to_string())?;
        let exact = steady_bvp(&p, 1.0, exit).map_err(|e| e.to_string())?;
        let profiles: Vec<Vec<f64>> = [0.0, 1.0, 10.0]
            .iter()
            .map(|&t| field.snapshot(t, &xs))
            .collect::<cde::Result<_>>()
            .map_err(|e| e.to_string())?;
        for (i, &x) in xs.iter().enumerate() {
            let e = exact.eval(x);
            worst_rel = worst_rel.max((profiles[0][i] - e).abs() / e.abs());
            for other in &profiles[1..] {
                worst_drift = worst_drift.max((other[i] - profiles[0][i]).abs());
            }
        }
    }
    check(
        worst_rel < 1e-5 && worst_drift < 1e-8,
        format!("rel err vs steady BVP {worst_rel:.2e}, drift over t in {{0, 1, 10}} {worst_drift:.2e}"),
    )
}

fn boundary_residuals() -> Outcome {
    let s = generic_scenario();
    let p = s.params;
    let trace = exit_trace(&s, (0.0, 2.0), 64).map_err(|e| e.to_string())?;
    let robin = robin_field(&s, &trace, 64);
    let danck = solve(ForcingSpec::danckwerts(&s), 64, SolveMode::InitialValue).map_err(|e| e.to_string())?;
    let xs = uniform(0.0, p.length, 51);
    let (mut inlet, mut outlet, mut max_ce): (f64, f64, f64) = (0.0, 0.0, 0.0);
    let (mut grad, mut max_grad): (f64, f64) = (0.0, 0.0);
    for t in uniform(0.0, 2.0, 21) {
        let sl = robin.slice(t).map_err(|e| e.to_string())?;
        let c0 = robin.eval_at(&sl, 0.0).unwrap();
        let dc0 = robin.eval_dx_at(&sl, 0.0).unwrap();
        inlet = inlet.max((p.velocity * c0 - p.diffusion * dc0 - p.velocity * s.inlet.value(t)).abs());
        let cl = robin.eval_at(&sl, p.length).unwrap();
        let dcl = robin.eval_dx_at(&sl, p.length).unwrap();
        let ce = trace.value(t).unwrap();
        max_ce = max_ce.max(ce.abs());
        outlet = outlet.max((p.velocity * cl - p.diffusion * dcl - p.velocity * ce).abs());

        let sd = danck.slice(t).map_err(|e| e.to_string())?;
        grad = grad.max(danck.eval_dx_at(&sd, p.length).unwrap().abs());
        for &x in &xs {
            max_grad = max_grad.max(danck.eval_dx_at(&sd, x).unwrap().abs());
        }
    }
    let inlet_tol = 1e-4 * p.velocity * 1.0;
    let outlet_tol = 1e-4 * p.velocity * max_ce.max(f64::EPSILON);
    let grad_tol = 1e-4 * max_grad;
    check(
        inlet < inlet_tol && outlet < outlet_tol && grad < grad_tol,
        format!(
            "inlet {inlet:.1e} (tol {inlet_tol:.0e}), outlet {outlet:.1e} (tol {outlet_tol:.1e}), \
             exit gradient {grad:.1e} (tol {grad_tol:.1e})"
        ),
    )
}

fn peclet_sweep() -> Outcome {
    let (d, v) = (1.0, 1.0);
    let mut rows = Vec::new();
    for pe in [5.0, 20.0, 80.0] {
        let p = PhysicalParams {
            retardation: 1.0,
            diffusion: d,
            velocity: v,
            decay: 0.1,
            production: 0.0,
            length: pe * d / v,
            t0: 0.0,
        };
        let sol = steady_bvp(&p, 1.0, SteadyExit::Neumann).map_err(|e| e.to_string())?;
        rows.push((pe, sol.eval(p.length), sol.eval(d / v)));
    }
    let report: Vec<String> = rows
        .iter()
        .map(|(pe, out, inner)| format!("Pe={pe}: C(ell)={out:.3e} C(D/v)={inner:.3}"))
        .collect();
    let decreasing = rows.windows(2).all(|w| w[1].1 < w[0].1);
    let interior_holds = rows.iter().all(|r| r.2 > 0.5);
    let last = rows.last().unwrap();
    check(
        decreasing && interior_holds && last.1 < 1e-2 * last.2,
        report.join("; "),
    )
}

fn kernel_suite() -> Outcome {
    let mut mass: f64 = 0.0;
    for t in [1e-3f64, 0.1, 1.0, 10.0] {
        let w = 40.0 * t.sqrt();
        let m = simpson(|y| kernel(y, t, KernelOrder::Value).unwrap(), -w, w, 4000);
        mass = mass.max((m - 1.0).abs());
    }
    let mut semigroup: f64 = 0.0;
    for (x, t1, t2) in [
        (0.0, 0.5, 0.5),
        (0.7, 0.1, 1.3),
        (-1.2, 2.0, 0.05),
        (3.0, 0.4, 0.9),
    ] {
        let w = 40.0 * f64::sqrt(t1 + t2);
        let conv = simpson(
            |y| kernel(x - y, t1, KernelOrder::Value).unwrap() * kernel(y, t2, KernelOrder::Value).unwrap(),
            -w,
            w,
            20_000,
        );
        semigroup = semigroup.max((conv - heat_kernel(x, t1 + t2)).abs());
    }
    let odd = [0.1, 0.5, 1.0, 2.5]
        .iter()
        .flat_map(|&x| [0.01, 1.0].map(|t| (x, t)))
        .all(|(x, t)| kernel(-x, t, KernelOrder::Dx).unwrap() == -kernel(x, t, KernelOrder::Dx).unwrap());
    check(
        mass < 1e-10 && semigroup < 1e-8 && odd,
        format!("mass err {mass:.1e}, semigroup err {semigroup:.1e}, K_x odd: {odd}"),
    )
}

fn convergence() -> Outcome {
    let s = generic_scenario();
    let trace = exit_trace(&s, (0.0, 2.0), 64).map_err(|e| e.to_string())?;
    let xs = uniform(0.0, s.params.length, 51);
    let mut ts = vec![0.01];
    ts.extend(window_times());
    let mut prev = robin_field(&s, &trace, 16)
        .sample(&xs, &ts)
        .map_err(|e| e.to_string())?;
    let mut deltas = Vec::new();
    for n in [32, 64, 128] {
        let cur = robin_field(&s, &trace, n)
            .sample(&xs, &ts)
            .map_err(|e| e.to_string())?;
        let d = cur
            .iter()
            .flatten()
            .zip(prev.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        deltas.push(d);
        prev = cur;
    }
    let monotone = deltas.windows(2).all(|w| w[1] < w[0]);
    let ratio = richardson_ratio(&s, FdGrid::new(101, 100, 2.0), &ExitCondition::RobinTrace(trace))
        .map_err(|e| e.to_string())?;
    check(
        monotone && deltas[2] < 1e-6 && (3.5..=4.5).contains(&ratio),
        format!(
            "deltas 16->32 {:.2e}, 32->64 {:.2e}, 64->128 {:.2e}; Richardson ratio {ratio:.3}",
            deltas[0], deltas[1], deltas[2]
        ),
    )
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let runs: [&[&str]; 3] = [
        &[
            "solve",
            "--set",
            "params.mu=0.1",
            "--set",
            "params.gamma=0.05",
            "--t-end",
            "2",
            "--convergence",
        ],
        &["eigen", "--kind", "danckwerts", "--n", "50"],
        &["exit-trace", "--set", "params.mu=0.1", "--t-end", "2"],
    ];
    let mut compared = 0;
    for (i, args) in runs.iter().enumerate() {
        let mut outputs = Vec::new();
        for (j, threads) in ["1", "0"].iter().enumerate() {
            let out = dir.path().join(format!("{i}-{j}"));
            let status = Command::new(env!("CARGO_BIN_EXE_cde"))
                .args(*args)
                .arg("--out")
                .arg(&out)
                .env("CDE_NUM_THREADS", threads)
                .status()
                .map_err(|e| e.to_string())?;
            if !status.success() {
                return Err(format!("`cde {}` exited with {status}", args.join(" ")));
            }
            outputs.push(out);
        }
        let mut names: Vec<_> = fs::read_dir(&outputs[0])
            .map_err(|e| e.to_string())?
            .map(|e| e.unwrap().file_name())
            .collect();
        names.sort();
        for name in names {
            let a = fs::read(outputs[0].join(&name)).map_err(|e| e.to_string())?;
            let b = fs::read(outputs[1].join(&name)).map_err(|e| e.to_string())?;
            if a != b {
                return Err(format!(
                    "{} differs for `cde {}`",
                    name.to_string_lossy(),
                    args[0]
                ));
            }
            compared += 1;
        }
    }
    Ok(format!(
        "{compared} output files byte-identical across repeated runs"
    ))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("eigen structure", eigen_structure, Duration::from_secs(5)),
        ("transform identity", transform_identity, Duration::from_secs(1)),
        ("equilibrium exactness", equilibrium, Duration::from_secs(30)),
        ("oracle triangle", oracle_triangle, Duration::from_secs(120)),
        ("steady-state closure", steady_closure, Duration::from_secs(10)),
        (
            "boundary-condition residuals",
            boundary_residuals,
            Duration::from_secs(20),
        ),
        (
            "Danckwerts outflow (Peclet sweep)",
            peclet_sweep,
            Duration::from_secs(5),
        ),
        ("kernel suite", kernel_suite, Duration::from_secs(5)),
        (
            "truncation and FD convergence",
            convergence,
            Duration::from_secs(120),
        ),
        ("CLI determinism", determinism, Duration::from_secs(10)),
    ];
    let mut failed = 0;
    for (i, (name, f, budget)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = f();
        let elapsed = start.elapsed();
        let (ok, detail) = match outcome {
            Ok(d) => (elapsed <= *budget, d),
            Err(d) => (false, d),
        };
        if !ok {
            failed += 1;
        }
        println!(
            "{} {:>2} {name} [{:.2} s / {} s]: {detail}",
            if ok { "PASS" } else { "FAIL" },
            i + 1,
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
