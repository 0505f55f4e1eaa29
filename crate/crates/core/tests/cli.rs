use std::fs;
use std::path::Path;
use std::process::Command;

const EQUILIBRIUM: &str = r#"
[params]
R = 1.0
D = 1.0
v = 1.0
mu = 0.1
gamma = 0.05
ell = 1.0

[inlet]
kind = "constant"
value = 0.5

[initial]
kind = "constant"
value = 0.5

[exit]
mode = "measured"
value = 0.5
"#;

fn run(args: &[&str]) -> i32 {
    let argv = std::iter::once("cde").chain(args.iter().copied());
    cde::cli::run(argv)
}

fn rows(path: &Path) -> (String, Vec<Vec<String>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().to_string();
    (
        header,
        lines
            .map(|l| l.split(',').map(str::to_string).collect())
            .collect(),
    )
}

#[test]
fn equilibrium_solve_is_flat() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("eq.toml");
    fs::write(&cfg, EQUILIBRIUM).unwrap();
    let out = dir.path().join("out");
    let code = run(&[
        "solve",
        "--config",
        cfg.to_str().unwrap(),
        "--nx",
        "51",
        "--nt",
        "21",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let (header, data) = rows(&out.join("field.csv"));
    assert_eq!(header, "x,t,c");
    assert_eq!(data.len(), 51 * 21);
    for r in &data {
        let c: f64 = r[2].parse().unwrap();
        assert!((c - 0.5).abs() < 1e-5, "{r:?}");
    }
    let manifest = fs::read_to_string(out.join("manifest.txt")).unwrap();
    assert!(manifest.contains("config_sha256 = "));
    assert!(manifest.contains("tol.time_quad_rel = "));
}

#[test]
fn danckwerts_eigen_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(
        run(&["eigen", "--kind", "danckwerts", "--n", "50", "--out", out]),
        0
    );
    let (header, data) = rows(&dir.path().join("eigen.csv"));
    assert_eq!(header, "n,kind,lambda,k,norm_sq,bracket_lo,bracket_hi,residual");
    assert_eq!(data.len(), 50);
    for (i, r) in data.iter().enumerate() {
        assert_eq!(r[0], i.to_string());
        assert_eq!(r[1], "danckwerts");
        let f: Vec<f64> = [2, 3, 5, 6, 7].iter().map(|&j| r[j].parse().unwrap()).collect();
        let (lambda, k, lo, hi, res) = (f[0], f[1], f[2], f[3], f[4]);
        assert!(lo < lambda && lambda < hi, "row {i}");
        assert!((k * k - lambda).abs() < 1e-12 * lambda);
        assert!(res < 1e-9);
    }
}

#[test]
fn missing_config_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.toml");
    assert_eq!(run(&["solve", "--config", missing.to_str().unwrap()]), 1);
}

#[test]
fn bad_overrides_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(run(&["solve", "--set", "params.D=-1", "--out", out]), 1);
    assert_eq!(run(&["solve", "--nt", "0", "--out", out]), 1);
    assert_eq!(run(&["solve", "--t-start", "2", "--t-end", "1", "--out", out]), 1);
    assert_eq!(run(&["solve", "--set", "numerics.bogus=1", "--out", out]), 1);
    assert_eq!(run(&["no-such-command"]), 1);
    assert!(!dir.path().join("field.csv").exists());
}

#[test]
fn config_parse_error_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[params]\nR = 1.0\nD = \"one\"\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_cde"))
        .args(["solve", "--config", cfg.to_str().unwrap()])
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3"), "{err}");
}

#[test]
fn unbounded_large_t_forcing_exits_with_numerical_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("grow.toml");
    fs::write(
        &cfg,
        "[params]\nR = 1.0\nD = 1.0\nv = 1.0\nell = 1.0\n\n\
         [inlet]\nkind = \"exponential-decay\"\namplitude = 1.0\nrate = 2.0\n\n\
         [initial]\nkind = \"constant\"\nvalue = 0.0\n\n\
         [exit]\nmode = \"measured\"\nvalue = 0.0\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    let code = run(&[
        "solve",
        "--config",
        cfg.to_str().unwrap(),
        "--mode",
        "large-t",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 2);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let outputs: Vec<_> = [("1", "a"), ("4", "b"), ("0", "c")]
        .iter()
        .map(|(threads, name)| {
            let out = dir.path().join(name);
            let status = Command::new(env!("CARGO_BIN_EXE_cde"))
                .args([
                    "solve",
                    "--set",
                    "params.mu=0.1",
                    "--set",
                    "params.gamma=0.05",
                    "--t-end",
                    "2",
                    "--convergence",
                    "--out",
                    out.to_str().unwrap(),
                ])
                .env("CDE_NUM_THREADS", threads)
                .status()
                .unwrap();
            assert!(status.success());
            out
        })
        .collect();
    for file in ["field.csv", "convergence.csv", "manifest.txt"] {
        let first = fs::read(outputs[0].join(file)).unwrap();
        for o in &outputs[1..] {
            assert_eq!(first, fs::read(o.join(file)).unwrap(), "{file}");
        }
    }
}
