use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_fluxlim"));
    c.env("RUST_LOG", "error");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn golden_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests").join("golden")
}

fn scratch(name: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("cli-tests");
    fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

/// Compares against `tests/golden/<name>`; `UPDATE_GOLDEN=1` rewrites it.
fn golden(name: &str, actual: &str) {
    let path = golden_dir().join(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        fs::create_dir_all(golden_dir()).unwrap();
        fs::write(&path, actual).unwrap();
        return;
    }
    let expected = fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert_eq!(actual, expected, "output differs from {}", path.display());
}

const VOLATILE: [&str; 4] = ["wall_clock_seconds", "started_unix_seconds", "runtime_seconds", "threads"];

fn strip(value: &mut Value) {
    match value {
        Value::Object(map) => {
            for key in VOLATILE {
                map.remove(key);
            }
            map.values_mut().for_each(strip);
        }
        Value::Array(items) => items.iter_mut().for_each(strip),
        _ => {}
    }
}

fn stable_report(path: &PathBuf) -> String {
    let mut v: Value = serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
    strip(&mut v);
    let mut text = serde_json::to_string_pretty(&v).unwrap();
    text.push('\n');
    text
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// Runs a command with a report, checks exit code 0, and compares stdout and the report.
fn check(name: &str, args: &[&str]) {
    let report = scratch(&format!("{name}.report.json"));
    let mut full: Vec<&str> = args.to_vec();
    let report_str = report.to_str().unwrap().to_string();
    full.extend(["--report", &report_str]);
    let o = run(&full);
    assert_eq!(o.status.code(), Some(0), "{name}: {}", String::from_utf8_lossy(&o.stderr));
    golden(&format!("{name}.out"), &stdout(&o));
    let stable = stable_report(&report).replace(&report_str, "<report>");
    golden(&format!("{name}.report.json"), &stable);
}

#[test]
fn verify_quick_push_push() {
    check("verify", &["verify", "push-push", "--profile", "quick"]);
}

#[test]
fn junction_analysis() {
    check(
        "junction",
        &["junction-analysis", "--scenario", "fading-reward", "--x0", "0", "--level", "0.5"],
    );
}

#[test]
fn solve_fl() {
    check(
        "solve_fl",
        &["solve-fl", "--scenario", "push-push", "--limiter", "htreg", "--h", "0.1"],
    );
}

#[test]
fn solve_regional() {
    check(
        "solve_regional",
        &["solve-regional", "--scenario", "fading-reward", "--variant", "minus", "--h", "0.1"],
    );
}

#[test]
fn solve_viscous() {
    check(
        "solve_viscous",
        &["solve-viscous", "--scenario", "fading-reward", "--eta", "0.1", "--h", "0.05"],
    );
}

#[test]
fn viscosity_sweep() {
    check(
        "sweep",
        &["viscosity-sweep", "--scenario", "fading-reward", "--etas", "0.2,0.1", "--h", "0.05"],
    );
}

#[test]
fn simulate() {
    check(
        "simulate",
        &["simulate", "--scenario", "fading-reward", "--variant", "plus", "--x0", "-0.5", "--T", "0.5", "--h", "0.05"],
    );
}

#[test]
fn profile_export() {
    check(
        "profile_export",
        &["profile-export", "--scenario", "push-push", "--range", "-1", "1", "--n", "9"],
    );
}

#[test]
fn out_flag_writes_file() {
    let out = scratch("field.csv");
    let o = run(&["solve-fl", "--scenario", "constant-cost", "--h", "0.25", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
    let text = fs::read_to_string(out).unwrap();
    assert!(text.starts_with("x,u,residual\n"));
}

#[test]
fn two_dimensional_field_from_file() {
    let cfg = scratch("flat2d.json");
    fs::write(
        &cfg,
        r#"{
  "name": "flat2d", "dim": 2, "box_halfwidth": 1.0,
  "region1": {"controls": {"box": [[-1, 1], [-1, 1]], "samples": [3, 3]}, "dynamics": ["a1", "a2"], "cost": "0.25"},
  "region2": {"controls": {"box": [[-1, 1], [-1, 1]], "samples": [3, 3]}, "dynamics": ["a1", "a2"], "cost": "0.25"}
}"#,
    )
    .unwrap();
    let o = run(&["solve-fl", "--scenario", cfg.to_str().unwrap(), "--h", "0.25"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x1,x2,u,residual"));
    assert_eq!(lines.count(), 81);
    for line in text.lines().skip(1) {
        let u: f64 = line.split(',').nth(2).unwrap().parse().unwrap();
        assert!((u - 0.25).abs() < 1e-6, "{line}");
    }
}

#[test]
fn repeated_runs_are_identical() {
    let args = ["solve-regional", "--scenario", "fading-reward", "--variant", "flg", "--h", "0.05"];
    let a = run(&args);
    let b = run(&["--threads", "1", args[0], args[1], args[2], args[3], args[4], args[5], args[6]]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn exit_codes() {
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["--version"]).status.code(), Some(0));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(64));
    let missing = run(&["verify", "no-such-scenario"]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("scenario not found"));
    assert_eq!(
        run(&["solve-viscous", "--scenario", "push-push", "--eta", "0.01", "--h", "0.1"]).status.code(),
        Some(64)
    );
    assert_eq!(
        run(&["solve-fl", "--scenario", "push-push", "--h", "0.1", "--tau", "5"]).status.code(),
        Some(64)
    );
    assert_eq!(run(&["solve-fl", "--scenario", "push-push", "--h", "-1"]).status.code(), Some(64));
    assert_eq!(
        run(&["solve-fl", "--scenario", "push-push", "--h", "0.1", "--max-iter", "3"]).status.code(),
        Some(2)
    );
    assert_eq!(
        run(&["solve-fl", "--scenario", "push-push", "--h", "0.1", "--out", "/nonexistent/dir/u.csv"]).status.code(),
        Some(74)
    );
}
