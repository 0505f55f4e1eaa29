//! Batch command-line front end.
//!
//! Every flag is shorthand for a config key (`--nx 51` is
//! `--set numerics.nx=51`). Overrides are written into the parsed config
//! table before it is deserialized and validated, so flags and config
//! values go through exactly the same checks.
//!
//! Exit codes: 0 on success, 1 on invalid input or I/O failure, 2 when a
//! numerical procedure fails.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::error::{ContextKind, ContextValue, ErrorKind};
use clap::{Args, Parser, Subcommand};
use sha2::{Digest, Sha256};

use crate::eigen::{self, build_basis, BoundaryKind, DEFAULT_MODES};
use crate::error::{Error, Result};
use crate::exit::{self, exit_trace, resolve_exit_trace, steady_exit_value, DEFAULT_TRACE_SAMPLES};
use crate::model::{ExitMode, ScalarFn, Scenario, ScenarioConfig};
use crate::oracle::{fd_solve, steady_bvp, ExitCondition, FdGrid, OracleKind, SteadyExit};
use crate::series::{self, error_estimate, solve, ForcingSpec, SolutionField, SolveMode};

/// Scenario used when no `--config` is given.
const DEFAULT_CONFIG: &str = r#"
[params]
R = 1.0
D = 1.0
v = 1.0
ell = 1.0

[inlet]
kind = "constant"
value = 1.0

[initial]
kind = "constant"
value = 0.0
"#;

const DEFAULT_NX: usize = 51;
const DEFAULT_NT: usize = 21;
const DEFAULT_FD_NX: usize = 401;
const DEFAULT_FD_NT: usize = 2000;
const CONVERGENCE_BASE: usize = 16;
const CONVERGENCE_TOP: usize = 128;
/// Convergence deltas are taken for `t - t0 >= 0.01 R ell^2 / D`.
const CONVERGENCE_T_FRACTION: f64 = 0.01;
const QUAD_MAX_DEPTH: u32 = 30;

#[derive(Parser, Debug)]
#[command(
    name = "cde",
    version,
    about = "Convection-diffusion transport on a finite column"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Series solution on an x-t grid (field.csv)
    Solve(SolveArgs),
    /// Same as `solve --kind danckwerts`
    Danckwerts(SolveArgs),
    /// Eigenvalue and norm table (eigen.csv)
    Eigen(CommonArgs),
    /// Exit concentration trace (exit_trace.csv)
    ExitTrace(CommonArgs),
    /// Robin/Danckwerts exit gap per time (danckwerts_error.csv)
    ErrorEstimate(EstimateArgs),
    /// Oracle field in the solve schema (oracle.csv)
    Oracle(OracleArgs),
    /// Series solution against an oracle (compare.csv, compare_summary.csv)
    Compare(OracleArgs),
    /// Sup-norm change under mode doubling (convergence.csv)
    Convergence(CommonArgs),
}

#[derive(Args, Debug, Clone, Default)]
struct CommonArgs {
    /// Scenario file (TOML); a unit scenario is used when omitted
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override any config key, e.g. `--set params.mu=0.2`
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output directory [output.dir]
    #[arg(long)]
    out: Option<PathBuf>,
    /// Boundary family: robin or danckwerts [numerics.kind]
    #[arg(long)]
    kind: Option<String>,
    /// initial-value or large-t [numerics.mode]
    #[arg(long)]
    mode: Option<String>,
    /// Number of modes [numerics.modes]
    #[arg(long = "n", visible_alias = "modes")]
    n: Option<i64>,
    /// Spatial output points [numerics.nx]
    #[arg(long)]
    nx: Option<i64>,
    /// Output times [numerics.nt]
    #[arg(long)]
    nt: Option<i64>,
    /// First output time [numerics.t_start]
    #[arg(long, allow_negative_numbers = true)]
    t_start: Option<f64>,
    /// Last output time [numerics.t_end]
    #[arg(long, allow_negative_numbers = true)]
    t_end: Option<f64>,
    /// Exit trace sample count [exit.samples]
    #[arg(long)]
    samples: Option<i64>,
    /// Also write gnuplot scripts [output.plot]
    #[arg(long)]
    plot: bool,
    /// Use the plain truncated series [numerics.tail_correction = false]
    #[arg(long)]
    no_tail_correction: bool,
}

#[derive(Args, Debug, Clone, Default)]
struct SolveArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Also write convergence.csv [output.convergence]
    #[arg(long)]
    convergence: bool,
}

#[derive(Args, Debug, Clone, Default)]
struct EstimateArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Probe length of the long-domain comparison [numerics.probe_length]
    #[arg(long)]
    probe_length: Option<f64>,
    /// Comma-separated evaluation times [numerics.times]
    #[arg(long, value_delimiter = ',')]
    times: Vec<f64>,
}

#[derive(Args, Debug, Clone, Default)]
struct OracleArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// fd or steady [numerics.oracle]
    #[arg(long)]
    oracle: Option<String>,
    /// Finite-difference nodes [numerics.fd_nx]
    #[arg(long)]
    fd_nx: Option<i64>,
    /// Finite-difference steps [numerics.fd_nt]
    #[arg(long)]
    fd_nt: Option<i64>,
}

/// Parses `argv` (program name first), runs the subcommand and returns the
/// process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => return clap_exit(e),
    };
    match with_thread_pool(|| dispatch(cli.command)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("cde: error: {e}");
            if e.is_numerical() {
                2
            } else {
                1
            }
        }
    }
}

fn clap_exit(e: clap::Error) -> i32 {
    match e.kind() {
        ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
            print!("{e}");
            0
        }
        ErrorKind::InvalidSubcommand => {
            let name = match e.get(ContextKind::InvalidSubcommand) {
                Some(ContextValue::String(s)) => s.clone(),
                _ => String::new(),
            };
            eprintln!("cde: error: {}", Error::UnknownSubcommand(name));
            1
        }
        _ => {
            eprint!("{e}");
            1
        }
    }
}

/// Runs `f` on a pool capped by `CDE_NUM_THREADS` (0 or unset: automatic).
fn with_thread_pool<F: FnOnce() -> Result<()> + Send>(f: F) -> Result<()> {
    let threads = match std::env::var("CDE_NUM_THREADS") {
        Ok(v) if !v.trim().is_empty() => v
            .trim()
            .parse::<usize>()
            .map_err(|_| Error::InvalidSetting(format!("CDE_NUM_THREADS must be a count, got {v:?}")))?,
        _ => 0,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidSetting(format!("thread pool: {e}")))?;
    pool.install(f)
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Solve(a) => cmd_solve("solve", &a, Vec::new()),
        Command::Danckwerts(a) => cmd_solve("danckwerts", &a, vec![kv("numerics.kind", "danckwerts")]),
        Command::Eigen(a) => cmd_eigen(&a),
        Command::ExitTrace(a) => cmd_exit_trace(&a),
        Command::ErrorEstimate(a) => cmd_error_estimate(&a),
        Command::Oracle(a) => cmd_oracle(&a, false),
        Command::Compare(a) => cmd_oracle(&a, true),
        Command::Convergence(a) => cmd_convergence(&a),
    }
}

// ---------------------------------------------------------------------------
// configuration

fn kv(key: &str, value: impl Into<toml::Value>) -> (String, toml::Value) {
    (key.to_string(), value.into())
}

impl CommonArgs {
    /// Flag overrides in the order they apply; `--set` comes last and wins.
    fn overrides(&self) -> Result<Vec<(String, toml::Value)>> {
        let mut out = Vec::new();
        if let Some(ref d) = self.out {
            out.push(kv("output.dir", d.to_string_lossy().into_owned()));
        }
        if let Some(ref k) = self.kind {
            out.push(kv("numerics.kind", k.as_str()));
        }
        if let Some(ref m) = self.mode {
            out.push(kv("numerics.mode", m.as_str()));
        }
        let ints = [
            ("numerics.modes", self.n),
            ("numerics.nx", self.nx),
            ("numerics.nt", self.nt),
            ("exit.samples", self.samples),
        ];
        out.extend(ints.into_iter().filter_map(|(k, v)| v.map(|v| kv(k, v))));
        let reals = [("numerics.t_start", self.t_start), ("numerics.t_end", self.t_end)];
        out.extend(reals.into_iter().filter_map(|(k, v)| v.map(|v| kv(k, v))));
        if self.plot {
            out.push(kv("output.plot", true));
        }
        if self.no_tail_correction {
            out.push(kv("numerics.tail_correction", false));
        }
        for item in &self.set {
            out.push(parse_assignment(item)?);
        }
        Ok(out)
    }
}

/// `key=value`, with the value read as a TOML literal and taken as a bare
/// string if it is not one.
fn parse_assignment(item: &str) -> Result<(String, toml::Value)> {
    let (key, raw) = item
        .split_once('=')
        .ok_or_else(|| Error::InvalidSetting(format!("--set expects KEY=VALUE, got {item:?}")))?;
    let key = key.trim();
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(Error::InvalidSetting(format!("bad key in --set {item:?}")));
    }
    let raw = raw.trim();
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    Ok((key.to_string(), value))
}

fn set_path(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<()> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().expect("split yields at least one part");
    let mut node = table;
    for part in parts {
        let entry = node
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        node = entry
            .as_table_mut()
            .ok_or_else(|| Error::InvalidSetting(format!("{key}: `{part}` is not a table")))?;
    }
    node.insert(last.to_string(), value);
    Ok(())
}

/// Validated inputs of one run.
struct Run {
    config: ScenarioConfig,
    scenario: Scenario,
    source: String,
    hash: String,
}

fn load(args: &CommonArgs, extra: Vec<(String, toml::Value)>) -> Result<Run> {
    let (text, base, source) = match args.config {
        Some(ref path) => {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
            (text, base, path.display().to_string())
        }
        None => (
            DEFAULT_CONFIG.to_string(),
            PathBuf::new(),
            "(built-in)".to_string(),
        ),
    };
    // parsed once as written, for diagnostics that carry a line number
    ScenarioConfig::parse(&text)?;
    let mut table: toml::Table = toml::from_str(&text).map_err(|e| Error::ConfigParse {
        line: 0,
        message: e.message().to_string(),
    })?;
    for (key, value) in extra.into_iter().chain(args.overrides()?) {
        set_path(&mut table, &key, value)?;
    }
    // where results go does not change them, so the output section is left out of the hash
    let mut hashed = table.clone();
    hashed.remove("output");
    let canonical = toml::to_string(&hashed).map_err(|e| Error::InvalidSetting(e.to_string()))?;
    let mut config: ScenarioConfig = toml::Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| Error::ConfigParse {
            line: 0,
            message: format!("after overrides: {}", e.message()),
        })?;
    if config.exit.file.is_some() {
        config.load_trace(if base.as_os_str().is_empty() {
            Path::new(".")
        } else {
            &base
        })?;
    }
    let scenario = crate::model::validate_scenario(&config)?;

    let mut hasher = Sha256::new();
    hasher.update(canonical.as_bytes());
    if let Some((ref t, ref c)) = config.exit.loaded {
        for v in t.iter().chain(c) {
            hasher.update(v.to_le_bytes());
        }
    }
    let hash = hasher.finalize().iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    });
    Ok(Run {
        config,
        scenario,
        source,
        hash,
    })
}

/// Effective numerical settings, with defaults filled in.
#[derive(Debug, Clone)]
struct Settings {
    kind: BoundaryKind,
    mode: SolveMode,
    modes: usize,
    modes_given: bool,
    nx: usize,
    nt: usize,
    t_start: f64,
    t_end: f64,
    samples: usize,
    tail_correction: bool,
    out: PathBuf,
    plot: bool,
    convergence: bool,
}

impl Run {
    fn settings(&self) -> Result<Settings> {
        let n = &self.config.numerics;
        let p = &self.scenario.params;
        let t_start = n.t_start.unwrap_or(p.t0);
        let t_end = n
            .t_end
            .unwrap_or(p.t0 + p.retardation * p.length * p.length / p.diffusion);
        if t_end <= t_start {
            return Err(Error::InvalidSetting(format!(
                "t_end = {t_end} must exceed t_start = {t_start}"
            )));
        }
        let o = &self.config.output;
        Ok(Settings {
            kind: n.kind.unwrap_or(BoundaryKind::Robin),
            mode: n.mode.unwrap_or_default(),
            modes: n.modes.unwrap_or(DEFAULT_MODES),
            modes_given: n.modes.is_some(),
            nx: n.nx.unwrap_or(DEFAULT_NX),
            nt: n.nt.unwrap_or(DEFAULT_NT),
            t_start,
            t_end,
            samples: self.config.exit.samples.unwrap_or(DEFAULT_TRACE_SAMPLES),
            tail_correction: n.tail_correction.unwrap_or(true),
            out: o.dir.clone().unwrap_or_else(|| PathBuf::from(".")),
            plot: o.plot.unwrap_or(false),
            convergence: o.convergence.unwrap_or(false),
        })
    }
}

impl Settings {
    fn xs(&self, ell: f64) -> Vec<f64> {
        grid(0.0, ell, self.nx)
    }

    fn ts(&self) -> Vec<f64> {
        if self.nt == 1 {
            vec![self.t_end]
        } else {
            grid(self.t_start, self.t_end, self.nt)
        }
    }
}

/// `n` uniform points on `[a, b]`, with both ends exact.
fn grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| {
            if i + 1 == n {
                b
            } else {
                a + (b - a) * i as f64 / (n - 1) as f64
            }
        })
        .collect()
}

// ---------------------------------------------------------------------------
// output

/// Shortest round-trip decimal form, switching to exponent notation for
/// very small or large magnitudes.
fn num(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 || (1e-4..1e6).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

struct Output {
    dir: PathBuf,
    files: Vec<String>,
}

impl Output {
    fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn csv<R>(&mut self, name: &str, header: &str, rows: R) -> Result<()>
    where
        R: IntoIterator<Item = Vec<String>>,
    {
        let mut text = String::with_capacity(4096);
        text.push_str(header);
        text.push('\n');
        for row in rows {
            text.push_str(&row.join(","));
            text.push('\n');
        }
        self.write(name, &text)
    }

    fn manifest(mut self, subcommand: &str, run: &Run, s: &Settings, extra: &[(&str, String)]) -> Result<()> {
        let mut m = String::new();
        let mut line = |k: &str, v: &dyn std::fmt::Display| {
            let _ = writeln!(m, "{k} = {v}");
        };
        line("version", &env!("CARGO_PKG_VERSION"));
        line("subcommand", &subcommand);
        line("config", &run.source);
        line("config_sha256", &run.hash);
        line("kind", &s.kind.as_str());
        line("mode", &s.mode.as_str());
        line("modes", &s.modes);
        line("nx", &s.nx);
        line("nt", &s.nt);
        line("t_start", &num(s.t_start));
        line("t_end", &num(s.t_end));
        line("trace_samples", &s.samples);
        line("tail_correction", &s.tail_correction);
        line("tol.eigen_root_rel", &num(eigen::ROOT_REL_TOL));
        line("tol.eigen_norm_rel", &num(eigen::NORM_REL_TOL));
        line("tol.space_quad_rel", &num(series::SPACE_REL_TOL));
        line("tol.time_quad_rel", &num(series::TIME_REL_TOL));
        line("tol.exit_quad_rel", &num(exit::REL_TOL));
        line("tol.quad_max_depth", &QUAD_MAX_DEPTH);
        for (k, v) in extra {
            line(k, v);
        }
        self.files.push("manifest.txt".to_string());
        line("files", &self.files.join(" "));
        self.write("manifest.txt", &m)
    }
}

fn field_rows(xs: &[f64], ts: &[f64], values: &[Vec<f64>]) -> Vec<Vec<String>> {
    ts.iter()
        .zip(values)
        .flat_map(|(&t, row)| {
            xs.iter()
                .zip(row)
                .map(move |(&x, &c)| vec![num(x), num(t), num(c)])
        })
        .collect()
}

fn plot_field(out: &mut Output, data: &str, ell: f64, nx: usize, nt: usize) -> Result<()> {
    let breakthrough = format!(
        "set datafile separator ','\n\
         set key autotitle columnhead\n\
         set xlabel 't'\n\
         set ylabel 'C(ell, t)'\n\
         ell = {ell:?}\n\
         plot '{data}' using 2:($1 >= ell*(1 - 1e-12) ? $3 : 1/0) with linespoints title 'outlet'\n\
         pause -1\n"
    );
    let profiles = format!(
        "set datafile separator ','\n\
         set xlabel 'x'\n\
         set ylabel 'C(x, t)'\n\
         nx = {nx}\n\
         nt = {nt}\n\
         plot for [k=0:nt-1] '{data}' every ::(1 + k*nx)::(k*nx + nx) using 1:3 with lines notitle\n\
         pause -1\n"
    );
    out.write("breakthrough.gp", &breakthrough)?;
    out.write("profiles.gp", &profiles)
}

// ---------------------------------------------------------------------------
// subcommands

/// Forcing shared by every mode count of one run.
fn forcing(scenario: &Scenario, s: &Settings) -> Result<ForcingSpec> {
    Ok(match s.kind {
        BoundaryKind::Danckwerts => ForcingSpec::danckwerts(scenario),
        BoundaryKind::Robin => {
            let large_t = s.mode == SolveMode::LargeT;
            ForcingSpec::robin(
                scenario,
                resolve_exit_trace(scenario, s.t_end, s.samples, large_t)?,
            )
        }
    })
}

fn series_field(forcing: ForcingSpec, modes: usize, s: &Settings) -> Result<SolutionField> {
    Ok(solve(forcing, modes, s.mode)?.with_tail_correction(s.tail_correction))
}

fn cmd_solve(name: &str, args: &SolveArgs, mut extra: Vec<(String, toml::Value)>) -> Result<()> {
    if args.convergence {
        extra.push(kv("output.convergence", true));
    }
    let run = load(&args.common, extra)?;
    let s = run.settings()?;
    let ell = run.scenario.params.length;
    let (xs, ts) = (s.xs(ell), s.ts());
    let forcing = forcing(&run.scenario, &s)?;
    let field = series_field(forcing.clone(), s.modes, &s)?;
    let values = field.sample(&xs, &ts)?;

    let mut out = Output::create(&s.out)?;
    out.csv("field.csv", "x,t,c", field_rows(&xs, &ts, &values))?;
    if s.convergence {
        let rows = convergence_rows(&run.scenario, &forcing, &s, s.modes)?;
        out.csv("convergence.csv", "n_modes,linf_delta", rows)?;
    }
    if s.plot {
        plot_field(&mut out, "field.csv", ell, s.nx, ts.len())?;
    }
    out.manifest(name, &run, &s, &[])
}

fn cmd_eigen(args: &CommonArgs) -> Result<()> {
    let run = load(args, Vec::new())?;
    let s = run.settings()?;
    let t = run.scenario.transform();
    let ell = run.scenario.params.length;
    let basis = build_basis(s.kind, t.r, ell, s.modes)?;
    let rows = basis.pairs.iter().enumerate().map(|(i, p)| {
        vec![
            p.n.to_string(),
            s.kind.as_str().to_string(),
            num(p.lambda),
            num(p.k),
            num(p.norm_sq),
            num(p.bracket.0),
            num(p.bracket.1),
            num(basis.boundary_residual(i)),
        ]
    });
    let mut out = Output::create(&s.out)?;
    out.csv(
        "eigen.csv",
        "n,kind,lambda,k,norm_sq,bracket_lo,bracket_hi,residual",
        rows,
    )?;
    if s.plot {
        let script = "set datafile separator ','\n\
                      set key autotitle columnhead\n\
                      set logscale y\n\
                      set xlabel 'n'\n\
                      set ylabel 'k_n - bracket_lo'\n\
                      plot 'eigen.csv' using 1:($4 - $6) with linespoints title 'root offset in bracket'\n\
                      pause -1\n";
        out.write("eigen_gaps.gp", script)?;
    }
    out.manifest("eigen", &run, &s, &[("r", num(t.r)), ("ell", num(ell))])
}

fn cmd_exit_trace(args: &CommonArgs) -> Result<()> {
    let run = load(args, Vec::new())?;
    let s = run.settings()?;
    let scenario = &run.scenario;
    let trace = match scenario.exit {
        ExitMode::Measured(ref tr) => tr.clone(),
        ExitMode::Computed => exit_trace(scenario, (scenario.params.t0, s.t_end), s.samples)?,
    };
    let rows = s
        .ts()
        .into_iter()
        .map(|t| Ok(vec![num(t), num(trace.value(t)?), num(trace.derivative(t)?)]))
        .collect::<Result<Vec<_>>>()?;
    let mut out = Output::create(&s.out)?;
    out.csv("exit_trace.csv", "t,c_e,dc_e_dt", rows)?;
    if s.plot {
        let script = "set datafile separator ','\n\
                      set key autotitle columnhead\n\
                      set xlabel 't'\n\
                      plot 'exit_trace.csv' using 1:2 with lines\n\
                      pause -1\n";
        out.write("exit_trace.gp", script)?;
    }
    let provenance = trace.provenance().as_str().to_string();
    out.manifest("exit-trace", &run, &s, &[("trace_provenance", provenance)])
}

fn cmd_error_estimate(args: &EstimateArgs) -> Result<()> {
    let mut extra = Vec::new();
    if let Some(l) = args.probe_length {
        extra.push(kv("numerics.probe_length", l));
    }
    if !args.times.is_empty() {
        let list: Vec<toml::Value> = args.times.iter().map(|&t| t.into()).collect();
        extra.push(kv("numerics.times", list));
    }
    let run = load(&args.common, extra)?;
    let s = run.settings()?;
    let p = &run.scenario.params;
    let probe_length = run.config.numerics.probe_length.unwrap_or(10.0 * p.length);
    let times = match run.config.numerics.times {
        Some(ref t) => t.clone(),
        None => s.ts().into_iter().filter(|&t| t > p.t0).collect(),
    };
    let rows = error_estimate(&run.scenario, s.modes, &times, probe_length)?;
    let mut out = Output::create(&s.out)?;
    out.csv(
        "danckwerts_error.csv",
        "t,e_d,probe,floor,flag",
        rows.iter().map(|r| {
            vec![
                num(r.t),
                num(r.e_d),
                num(r.probe),
                num(r.floor),
                r.flag.as_str().to_string(),
            ]
        }),
    )?;
    out.manifest("error-estimate", &run, &s, &[("probe_length", num(probe_length))])
}

fn oracle_values(run: &Run, s: &Settings, kind: OracleKind, xs: &[f64], ts: &[f64]) -> Result<Vec<Vec<f64>>> {
    let scenario = &run.scenario;
    match kind {
        OracleKind::Fd => {
            let n = &run.config.numerics;
            let grid = FdGrid::new(
                n.fd_nx.unwrap_or(DEFAULT_FD_NX),
                n.fd_nt.unwrap_or(DEFAULT_FD_NT),
                s.t_end,
            );
            let exit = match s.kind {
                BoundaryKind::Robin => {
                    ExitCondition::RobinTrace(resolve_exit_trace(scenario, s.t_end, s.samples, false)?)
                }
                BoundaryKind::Danckwerts => ExitCondition::DanckwertsNeumann,
            };
            let sol = fd_solve(scenario, grid, &exit)?;
            Ok(ts
                .iter()
                .map(|&t| xs.iter().map(|&x| sol.eval(x, t)).collect())
                .collect())
        }
        OracleKind::Steady => {
            let g = match scenario.inlet {
                ScalarFn::Constant { value } => value,
                _ => {
                    return Err(Error::InvalidSetting(
                        "the steady oracle needs a constant inlet".into(),
                    ))
                }
            };
            let exit = match s.kind {
                BoundaryKind::Danckwerts => SteadyExit::Neumann,
                BoundaryKind::Robin => SteadyExit::Robin(match scenario.exit {
                    ExitMode::Measured(ref tr) if tr.is_constant() => tr.value(scenario.params.t0)?,
                    ExitMode::Measured(_) => {
                        return Err(Error::InvalidSetting(
                            "the steady oracle needs a constant exit trace".into(),
                        ))
                    }
                    ExitMode::Computed => steady_exit_value(scenario)?,
                }),
            };
            let sol = steady_bvp(&scenario.params, g, exit)?;
            let profile: Vec<f64> = xs.iter().map(|&x| sol.eval(x)).collect();
            Ok(vec![profile; ts.len()])
        }
    }
}

fn cmd_oracle(args: &OracleArgs, compare: bool) -> Result<()> {
    let mut extra = Vec::new();
    if let Some(ref o) = args.oracle {
        extra.push(kv("numerics.oracle", o.as_str()));
    }
    if let Some(n) = args.fd_nx {
        extra.push(kv("numerics.fd_nx", n));
    }
    if let Some(n) = args.fd_nt {
        extra.push(kv("numerics.fd_nt", n));
    }
    let run = load(&args.common, extra)?;
    let s = run.settings()?;
    let kind = run.config.numerics.oracle.unwrap_or_default();
    let ell = run.scenario.params.length;
    let (xs, ts) = (s.xs(ell), s.ts());
    let reference = oracle_values(&run, &s, kind, &xs, &ts)?;
    let mut out = Output::create(&s.out)?;
    let info = [("oracle", kind.as_str().to_string())];
    if !compare {
        out.csv("oracle.csv", "x,t,c", field_rows(&xs, &ts, &reference))?;
        if s.plot {
            plot_field(&mut out, "oracle.csv", ell, s.nx, ts.len())?;
        }
        return out.manifest("oracle", &run, &s, &info);
    }

    let field = series_field(forcing(&run.scenario, &s)?, s.modes, &s)?;
    let values = field.sample(&xs, &ts)?;
    let mut rows = Vec::with_capacity(xs.len() * ts.len());
    let (mut max, mut sum_sq, mut scale) = (0.0f64, 0.0, 0.0f64);
    let mut at = (f64::NAN, f64::NAN);
    for (k, &t) in ts.iter().enumerate() {
        for (i, &x) in xs.iter().enumerate() {
            let (a, b) = (values[k][i], reference[k][i]);
            let err = (a - b).abs();
            if err > max || at.0.is_nan() {
                max = err;
                at = (x, t);
            }
            sum_sq += err * err;
            scale = scale.max(b.abs());
            rows.push(vec![num(x), num(t), num(a), num(b), num(err)]);
        }
    }
    let count = rows.len();
    out.csv("compare.csv", "x,t,series,oracle,abs_err", rows)?;
    let rel = if scale > 0.0 { max / scale } else { max };
    let summary = [
        ("points", count.to_string()),
        ("max_abs_err", num(max)),
        ("rms_err", num((sum_sq / count as f64).sqrt())),
        ("rel_linf_err", num(rel)),
        ("x_at_max", num(at.0)),
        ("t_at_max", num(at.1)),
    ];
    out.csv(
        "compare_summary.csv",
        "metric,value",
        summary.iter().map(|(k, v)| vec![k.to_string(), v.clone()]),
    )?;
    out.manifest("compare", &run, &s, &info)
}

/// `n_modes, max |C_n - C_{n/2}|` for `n` doubling from 32 up to `top`,
/// over output times at least `0.01 R ell^2 / D` past `t0`.
fn convergence_rows(
    scenario: &Scenario,
    forcing: &ForcingSpec,
    s: &Settings,
    top: usize,
) -> Result<Vec<Vec<String>>> {
    if top < 2 * CONVERGENCE_BASE {
        return Err(Error::InvalidSetting(format!(
            "convergence needs at least {} modes, got {top}",
            2 * CONVERGENCE_BASE
        )));
    }
    let p = &scenario.params;
    let t_min = p.t0 + CONVERGENCE_T_FRACTION * p.retardation * p.length * p.length / p.diffusion;
    let ts: Vec<f64> = s.ts().into_iter().filter(|&t| t >= t_min).collect();
    if ts.is_empty() {
        return Err(Error::InvalidSetting(format!(
            "no output time at or after {t_min}"
        )));
    }
    let xs = s.xs(p.length);
    let mut n = CONVERGENCE_BASE;
    let mut previous = series_field(forcing.clone(), n, s)?.sample(&xs, &ts)?;
    let mut rows = Vec::new();
    while 2 * n <= top {
        n *= 2;
        let current = series_field(forcing.clone(), n, s)?.sample(&xs, &ts)?;
        let delta = current
            .iter()
            .flatten()
            .zip(previous.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        rows.push(vec![n.to_string(), num(delta)]);
        previous = current;
    }
    Ok(rows)
}

fn cmd_convergence(args: &CommonArgs) -> Result<()> {
    let run = load(args, Vec::new())?;
    let s = run.settings()?;
    let top = if s.modes_given { s.modes } else { CONVERGENCE_TOP };
    let forcing = forcing(&run.scenario, &s)?;
    let rows = convergence_rows(&run.scenario, &forcing, &s, top)?;
    let mut out = Output::create(&s.out)?;
    out.csv("convergence.csv", "n_modes,linf_delta", rows)?;
    out.manifest("convergence", &run, &s, &[("top_modes", top.to_string())])
}
