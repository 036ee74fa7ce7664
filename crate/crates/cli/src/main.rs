use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Map, Value};

use fluxlim_core::fl::{residuals_ishii, solve_fl, FlParams};
use fluxlim_core::grid::{discrete_lipschitz, Grid, ValueField};
use fluxlim_core::hamiltonian::FluxLimiter;
use fluxlim_core::junction::NormalProfile;
use fluxlim_core::regional::{default_dt, simulate_trajectory, solve_regional, RegionalParams, Variant};
use fluxlim_core::scenario::{Scenario, ScenarioError};
use fluxlim_core::verify::{run_battery, Profile};
use fluxlim_core::viscous::{kirchhoff_gap, solve_viscous, viscosity_sweep, ViscousParams};
use fluxlim_core::Error;

mod output;

use output::{emit, g12, json_text, Csv};

const EXIT_CHECK_FAILED: u8 = 1;
const EXIT_SOLVER: u8 = 2;
const EXIT_USAGE: u8 = 64;
const EXIT_IO: u8 = 74;

#[derive(Debug, Parser)]
#[command(name = "fluxlim", version, about = "Solvers for HJB equations on two half-spaces glued along an interface")]
struct Cli {
    /// Worker threads (default: all available).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed of the randomized verification checks.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Write the run report (JSON) to this path.
    #[arg(long, global = true)]
    report: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GridArgs {
    /// Built-in scenario name or path to a scenario JSON file.
    #[arg(long)]
    scenario: String,
    /// Grid half-width (default: the scenario box).
    #[arg(long = "L")]
    halfwidth: Option<f64>,
    #[arg(long, default_value_t = 0.01)]
    h: f64,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    #[arg(long)]
    max_iter: Option<usize>,
    /// Output CSV (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the verification battery.
    Verify {
        scenario: String,
        #[arg(long, default_value = "full")]
        profile: String,
    },
    /// Junction quantities at a point of the interface.
    JunctionAnalysis {
        #[arg(long)]
        scenario: String,
        /// Point of the interface (comma-separated; a single value in 2-D is
        /// the tangential coordinate).
        #[arg(long, default_value = "0", allow_hyphen_values = true)]
        x0: String,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        p_tan: f64,
        #[arg(long, allow_hyphen_values = true)]
        level: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Flux-limited finite-difference solve.
    SolveFl {
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long, default_value = "none")]
        limiter: String,
        #[arg(long)]
        tau: Option<f64>,
    },
    /// Semi-Lagrangian solve for U-, U+ or U^FL_G.
    SolveRegional {
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long)]
        variant: String,
        #[arg(long)]
        dt: Option<f64>,
    },
    /// Vanishing-viscosity solve (1-D).
    SolveViscous {
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long)]
        eta: f64,
        #[arg(long)]
        tau: Option<f64>,
    },
    /// Viscous solves for several etas against the regional U+.
    ViscositySweep {
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long, value_delimiter = ',', required = true)]
        etas: Vec<f64>,
    },
    /// Greedy rollout of the semi-Lagrangian policy.
    Simulate {
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long, default_value = "plus")]
        variant: String,
        #[arg(long, allow_hyphen_values = true)]
        x0: String,
        #[arg(long = "T", default_value_t = 20.0)]
        horizon: f64,
        /// Rollout step (default: h / (2 M_b)).
        #[arg(long)]
        dt: Option<f64>,
    },
    /// Tabulate f1, f2, h1, h2 and phi along the normal direction.
    ProfileExport {
        #[arg(long)]
        scenario: String,
        #[arg(long, default_value = "0", allow_hyphen_values = true)]
        x0: String,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        p_tan: f64,
        #[arg(long, num_args = 2, allow_hyphen_values = true, default_values_t = [-2.0, 2.0])]
        range: Vec<f64>,
        #[arg(long, default_value_t = 401)]
        n: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Failure of a command, carrying its exit code.
#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Failure {
        let code = match &e {
            Error::Usage(_) | Error::CflViolation { .. } | Error::InvalidGrid(_) | Error::ViscosityUnderResolved { .. } => EXIT_USAGE,
            Error::Io(_) => EXIT_IO,
            Error::Scenario(_) | Error::Junction(_) | Error::NonConvergence { .. } => EXIT_SOLVER,
        };
        let message = match &e {
            Error::Scenario(ScenarioError::NotFound(name)) => format!("scenario not found: {name}"),
            other => other.to_string(),
        };
        Failure { code, message }
    }
}

impl From<ScenarioError> for Failure {
    fn from(e: ScenarioError) -> Failure {
        Error::from(e).into()
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_USAGE,
        message: message.into(),
    }
}

fn io_failure(path: Option<&Path>, e: std::io::Error) -> Failure {
    Failure {
        code: EXIT_IO,
        message: match path {
            Some(p) => format!("{}: {e}", p.display()),
            None => format!("stdout: {e}"),
        },
    }
}

fn write(path: Option<&Path>, text: &str) -> Result<(), Failure> {
    emit(path, text).map_err(|e| io_failure(path, e))
}

/// Report under construction.
struct Report {
    command: Vec<String>,
    seed: u64,
    threads: usize,
    started: Instant,
    started_unix: f64,
    scenario: Option<Value>,
    fields: Vec<Value>,
    checks: Vec<Value>,
    summary: Map<String, Value>,
}

impl Report {
    fn new(cli: &Cli, command: Vec<String>) -> Report {
        Report {
            command,
            seed: cli.seed,
            threads: rayon::current_num_threads(),
            started: Instant::now(),
            started_unix: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64()),
            scenario: None,
            fields: Vec::new(),
            checks: Vec::new(),
            summary: Map::new(),
        }
    }

    fn scenario(&mut self, s: &Scenario) {
        self.scenario = Some(json!({"name": s.name, "config_hash": s.config().hash()}));
    }

    fn field(&mut self, label: &str, f: &ValueField) {
        self.fields.push(json!({"label": label, "meta": f.meta}));
    }

    fn set(&mut self, key: &str, value: Value) {
        self.summary.insert(key.into(), value);
    }

    fn finish(self) -> Value {
        json!({
            "command": self.command,
            "seed": self.seed,
            "threads": self.threads,
            "scenario": self.scenario,
            "fields": self.fields,
            "checks": self.checks,
            "summary": self.summary,
            "started_unix_seconds": self.started_unix,
            "wall_clock_seconds": self.started.elapsed().as_secs_f64(),
        })
    }
}

fn load(name: &str) -> Result<Scenario, Failure> {
    Ok(Scenario::resolve(name)?)
}

fn parse_point(text: &str, dim: usize, on_interface: bool) -> Result<Vec<f64>, Failure> {
    let mut x = text
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<Result<Vec<f64>, _>>()
        .map_err(|_| usage(format!("cannot parse point `{text}`")))?;
    if on_interface && dim == 2 && x.len() == 1 {
        x.push(0.0);
    }
    if x.len() != dim {
        return Err(usage(format!("point `{text}` must have {dim} coordinates")));
    }
    Ok(x)
}

fn build_grid(s: &Scenario, args: &GridArgs) -> Result<Grid, Failure> {
    let halfwidth = args.halfwidth.unwrap_or(s.box_halfwidth);
    if halfwidth > s.box_halfwidth * (1.0 + 1e-12) {
        return Err(usage(format!("--L {halfwidth} exceeds the scenario box {}", s.box_halfwidth)));
    }
    if !(args.tol > 0.0) {
        return Err(usage("--tol must be positive"));
    }
    Ok(Grid::new(s.dim, halfwidth, args.h)?)
}

fn field_csv(f: &ValueField) -> String {
    let g = &f.grid;
    let mut header: Vec<&str> = if g.dim == 1 { vec!["x"] } else { vec!["x1", "x2"] };
    header.extend(["u", "residual"]);
    let mut csv = Csv::new(&header);
    for k in 0..g.len() {
        let mut cells: Vec<String> = g.point(k).into_iter().map(g12).collect();
        cells.push(g12(f.values[k]));
        cells.push(g12(f.local_residual[k]));
        csv.row(&cells);
    }
    csv.into_string()
}

fn field_summary(report: &mut Report, f: &ValueField) {
    report.set("u_at_origin", json!(f.at_origin()));
    report.set("sup_norm", json!(f.sup_norm()));
    report.set("discrete_lipschitz", json!(discrete_lipschitz(f)));
    report.set("nodes", json!(f.grid.len()));
}

fn cmd_verify(report: &mut Report, seed: u64, scenario: &str, profile: &str) -> Result<u8, Failure> {
    let profile: Profile = profile.parse()?;
    let s = load(scenario)?;
    report.scenario(&s);
    let checks = run_battery(&s, profile, seed)?;
    let mut lines = String::new();
    let mut failed = 0;
    for c in &checks {
        let status = if c.skipped {
            "SKIP"
        } else if c.passed {
            "PASS"
        } else {
            failed += 1;
            "FAIL"
        };
        lines.push_str(&format!(
            "{:<26} {status}  measured={} threshold={}\n",
            c.name,
            g12(c.measured),
            g12(c.threshold)
        ));
        report.checks.push(serde_json::to_value(c).expect("checks serialize"));
    }
    lines.push_str(&format!(
        "verify {} ({profile}): {}/{} checks passed\n",
        s.name,
        checks.len() - failed,
        checks.len()
    ));
    write(None, &lines)?;
    report.set("profile", json!(profile.to_string()));
    report.set("failed_checks", json!(failed));
    Ok(if failed == 0 { 0 } else { EXIT_CHECK_FAILED })
}

fn profile_at<'s>(s: &'s Scenario, x0: &str, p_tan: f64, level: Option<f64>) -> Result<(Vec<f64>, NormalProfile<'s>), Failure> {
    let x = parse_point(x0, s.dim, true)?;
    if x[s.dim - 1] != 0.0 {
        return Err(usage(format!("{x0} is not on the interface")));
    }
    if s.dim == 1 && p_tan != 0.0 {
        return Err(usage("--p-tan must be 0 in one dimension"));
    }
    let a_max = level.map(|a| a.max(1.0 + 2.0 * s.m_l));
    let profile = NormalProfile::at(s, &x, p_tan, a_max)?;
    Ok((x, profile))
}

fn cmd_junction(report: &mut Report, scenario: &str, x0: &str, p_tan: f64, level: Option<f64>, out: Option<&Path>) -> Result<u8, Failure> {
    let s = load(scenario)?;
    report.scenario(&s);
    let (x, profile) = profile_at(&s, x0, p_tan, level)?;
    let analysis = profile.report(level).map_err(Error::from)?;
    let mut value = serde_json::to_value(&analysis).expect("report serializes");
    let map = value.as_object_mut().expect("object");
    map.insert("x".into(), json!(x));
    map.insert("p_tan".into(), json!(p_tan));
    map.insert("ht_control_form".into(), json!(profile.ht_control_form()));
    map.insert("ht_reg_control_form".into(), json!(profile.ht_reg_control_form()));
    let text = json_text(value.clone());
    write(out, &text)?;
    report.set("analysis", value);
    Ok(0)
}

fn cmd_profile_export(
    report: &mut Report,
    scenario: &str,
    x0: &str,
    p_tan: f64,
    range: &[f64],
    n: usize,
    out: Option<&Path>,
) -> Result<u8, Failure> {
    let s = load(scenario)?;
    report.scenario(&s);
    let (lo, hi) = (range[0], range[1]);
    if !(lo < hi) || n < 2 {
        return Err(usage("--range needs lo < hi and --n at least 2"));
    }
    let (_, profile) = profile_at(&s, x0, p_tan, None)?;
    let mut csv = Csv::new(&["s", "f1", "f2", "h1", "h2", "phi"]);
    for r in profile.profile_export(lo, hi, n) {
        csv.row(&[g12(r.s), g12(r.f1), g12(r.f2), g12(r.h1), g12(r.h2), g12(r.phi)]);
    }
    report.set("rows", json!(csv.rows()));
    report.set("ht", json!(profile.ht().map_err(Error::from)?));
    report.set("ht_reg", json!(profile.ht_reg().map_err(Error::from)?));
    write(out, &csv.into_string())?;
    Ok(0)
}

fn cmd_solve_fl(report: &mut Report, args: &GridArgs, limiter: &str, tau: Option<f64>) -> Result<u8, Failure> {
    let limiter: FluxLimiter = limiter.parse()?;
    let s = load(&args.scenario)?;
    report.scenario(&s);
    let grid = build_grid(&s, args)?;
    let params = FlParams {
        tau,
        tol: args.tol,
        max_iter: args.max_iter.unwrap_or(fluxlim_core::fl::DEFAULT_MAX_ITER),
        u0: None,
    };
    let field = solve_fl(&s, &grid, limiter, &params)?;
    report.field("u", &field);
    field_summary(report, &field);
    report.set("ishii", serde_json::to_value(residuals_ishii(&s, &field)?).expect("serializes"));
    write(args.out.as_deref(), &field_csv(&field))?;
    Ok(0)
}

fn regional_params(args: &GridArgs, dt: Option<f64>) -> RegionalParams {
    RegionalParams {
        dt,
        tol: args.tol,
        max_iter: args.max_iter.unwrap_or(fluxlim_core::regional::DEFAULT_MAX_ITER),
        u0: None,
    }
}

fn cmd_solve_regional(report: &mut Report, args: &GridArgs, variant: &str, dt: Option<f64>) -> Result<u8, Failure> {
    let variant: Variant = variant.parse()?;
    let s = load(&args.scenario)?;
    report.scenario(&s);
    let grid = build_grid(&s, args)?;
    let field = solve_regional(&s, &grid, variant, &regional_params(args, dt))?;
    report.field(&format!("u_{variant}"), &field);
    field_summary(report, &field);
    write(args.out.as_deref(), &field_csv(&field))?;
    Ok(0)
}

fn viscous_params(args: &GridArgs, eta: f64, tau: Option<f64>) -> ViscousParams {
    ViscousParams {
        eta,
        tau,
        tol: args.tol,
        max_iter: args.max_iter.unwrap_or(fluxlim_core::viscous::DEFAULT_MAX_ITER),
        u0: None,
    }
}

fn cmd_solve_viscous(report: &mut Report, args: &GridArgs, eta: f64, tau: Option<f64>) -> Result<u8, Failure> {
    let s = load(&args.scenario)?;
    report.scenario(&s);
    let grid = build_grid(&s, args)?;
    let field = solve_viscous(&s, &grid, &viscous_params(args, eta, tau))?;
    report.field("u_eta", &field);
    field_summary(report, &field);
    report.set("kirchhoff_gap", json!(kirchhoff_gap(&field)));
    write(args.out.as_deref(), &field_csv(&field))?;
    Ok(0)
}

fn cmd_sweep(report: &mut Report, args: &GridArgs, etas: &[f64]) -> Result<u8, Failure> {
    let s = load(&args.scenario)?;
    report.scenario(&s);
    let grid = build_grid(&s, args)?;
    let reference = solve_regional(&s, &grid, Variant::Plus, &regional_params(args, None))?;
    report.field("reference_u_plus", &reference);
    let rows = viscosity_sweep(&s, &grid, etas, &reference, &viscous_params(args, etas[0], None))?;
    let mut csv = Csv::new(&["eta", "sup_error", "u_at_origin", "kirchhoff_gap", "iterations", "error"]);
    let opt = |v: Option<f64>| v.map(g12).unwrap_or_default();
    for r in &rows {
        csv.row(&[
            g12(r.eta),
            opt(r.sup_error),
            opt(r.u_at_origin),
            opt(r.kirchhoff_gap),
            r.iterations.map(|i| i.to_string()).unwrap_or_default(),
            r.error.clone().unwrap_or_default().replace(',', ";"),
        ]);
    }
    report.set("rows", serde_json::to_value(&rows).expect("rows serialize"));
    write(args.out.as_deref(), &csv.into_string())?;
    Ok(if rows.iter().any(|r| r.error.is_some()) { EXIT_SOLVER } else { 0 })
}

fn cmd_simulate(report: &mut Report, args: &GridArgs, variant: &str, x0: &str, horizon: f64, dt: Option<f64>) -> Result<u8, Failure> {
    let variant: Variant = variant.parse()?;
    let s = load(&args.scenario)?;
    report.scenario(&s);
    let grid = build_grid(&s, args)?;
    let x = parse_point(x0, s.dim, false)?;
    let field = solve_regional(&s, &grid, variant, &regional_params(args, None))?;
    report.field(&format!("u_{variant}"), &field);
    let step = dt.unwrap_or_else(|| default_dt(&s, &grid));
    let rollout = simulate_trajectory(&s, &x, &field, variant, horizon, step)?;
    let mut header = vec!["t"];
    header.extend(if s.dim == 1 { vec!["x"] } else { vec!["x1", "x2"] });
    header.extend(["region", "control", "running_cost"]);
    let mut csv = Csv::new(&header);
    for st in &rollout.steps {
        let mut cells = vec![g12(st.t)];
        cells.extend(st.x.iter().copied().map(g12));
        let region = match st.region {
            fluxlim_core::scenario::Region::One => "region1",
            fluxlim_core::scenario::Region::Two => "region2",
            fluxlim_core::scenario::Region::Interface => "interface",
        };
        cells.push(region.into());
        cells.push(st.control.to_string());
        cells.push(g12(st.running_cost));
        csv.row(&cells);
    }
    report.set("cost", json!(rollout.cost));
    report.set("occupation", serde_json::to_value(&rollout.occupation).expect("serializes"));
    report.set("max_interface_normal", json!(rollout.max_interface_normal));
    report.set("final_x", json!(rollout.final_x));
    write(args.out.as_deref(), &csv.into_string())?;
    Ok(0)
}

fn dispatch(cli: &Cli, report: &mut Report) -> Result<u8, Failure> {
    match &cli.command {
        Command::Verify { scenario, profile } => cmd_verify(report, cli.seed, scenario, profile),
        Command::JunctionAnalysis {
            scenario,
            x0,
            p_tan,
            level,
            out,
        } => cmd_junction(report, scenario, x0, *p_tan, *level, out.as_deref()),
        Command::SolveFl { grid, limiter, tau } => cmd_solve_fl(report, grid, limiter, *tau),
        Command::SolveRegional { grid, variant, dt } => cmd_solve_regional(report, grid, variant, *dt),
        Command::SolveViscous { grid, eta, tau } => cmd_solve_viscous(report, grid, *eta, *tau),
        Command::ViscositySweep { grid, etas } => cmd_sweep(report, grid, etas),
        Command::Simulate {
            grid,
            variant,
            x0,
            horizon,
            dt,
        } => cmd_simulate(report, grid, variant, x0, *horizon, *dt),
        Command::ProfileExport {
            scenario,
            x0,
            p_tan,
            range,
            n,
            out,
        } => cmd_profile_export(report, scenario, x0, *p_tan, range, *n, out.as_deref()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    if let Some(k) = cli.threads {
        if k == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(EXIT_USAGE);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(k).build_global() {
            eprintln!("error: cannot configure threads: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    }
    let mut report = Report::new(&cli, std::env::args().skip(1).collect());
    let code = match dispatch(&cli, &mut report) {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message);
            report.set("error", json!(f.message));
            f.code
        }
    };
    report.set("exit_code", json!(code));
    if let Some(path) = &cli.report {
        if let Err(e) = emit(Some(path), &json_text(report.finish())) {
            eprintln!("error: {}: {e}", path.display());
            return ExitCode::from(EXIT_IO);
        }
    }
    ExitCode::from(code)
}
