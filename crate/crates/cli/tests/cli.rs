use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_halfrange"))
}

/// Writes `body` as `run.toml` in a fresh directory.
fn setup(body: &str) -> (TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, body).unwrap();
    (dir, cfg)
}

fn run(cfg: &Path, flags: &[&str]) -> i32 {
    let out = bin().args(flags).arg(cfg).output().unwrap();
    out.status.code().expect("exited normally")
}

fn report(dir: &TempDir) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.path().join("out/report.json")).unwrap()).unwrap()
}

fn f(v: &Value) -> f64 {
    v.as_f64().unwrap_or_else(|| panic!("not a number: {v}"))
}

const OUTPUT: &str = r#"
[output]
solution_csv = "out/solution.csv"
report_json = "out/report.json"
timings = false
"#;

fn signum_power(alpha: f64, nodes: usize, half_width: f64) -> String {
    format!(
        r#"
[problem]
preset = "signum_power"
alpha = {alpha:?}

[discretization]
half_width = {half_width:?}
nodes = {nodes}

[slab]
tau = 1.0

[boundary]
plus = {{ kind = "gaussian_bump", center = 1.0, width = 0.3 }}
minus = {{ kind = "zero" }}
{OUTPUT}"#
    )
}

#[test]
fn signum_power_run_reports_small_boundary_residuals() {
    let (dir, cfg) = setup(&signum_power(0.5, 64, 2.0));
    assert_eq!(run(&cfg, &[]), 0);
    let r = report(&dir);
    assert_eq!(r["status"], "ok");
    assert_eq!(r["admissibility_pass"], true);
    let res = &r["boundary_residuals"];
    assert!(f(&res["plus"]) < 1e-8 && f(&res["minus"]) < 1e-8, "{res}");
    let c = &r["contraction"];
    assert!(f(&c["norm_g_plus"]) < 1.0 && f(&c["norm_g_minus"]) < 1.0);
    let csv = fs::read_to_string(dir.path().join("out/solution.csv")).unwrap();
    assert!(csv.starts_with("# masses="));
    // header plus 11 default samples on [0, 1]
    assert_eq!(csv.lines().filter(|l| !l.starts_with('#')).count(), 12);
    assert!(r.get("timings").is_none());
}

#[test]
fn fokker_planck_records_the_tail_integral_check() {
    let body = format!(
        r#"
[problem]
preset = "fokker_planck"
b = [[1.0, 2.0], [1.0, 1.0]]

[discretization]
half_width = 4.0
nodes = 64

[slab]
tau = 1.0

[boundary]
plus = {{ kind = "indicator", lo = 0.0, hi = 1.0 }}
minus = {{ kind = "zero" }}
{OUTPUT}"#
    );
    let (dir, cfg) = setup(&body);
    assert_eq!(run(&cfg, &[]), 0);
    let r = report(&dir);
    let a = &r["admissibility"];
    assert_eq!(a["turning_points"].as_array().unwrap().len(), 1);
    assert_eq!(a["simplicity"][0]["pass"], true);
    // w = μ/(μ² + |μ|) = sgn(μ)/(1 + |μ|): a positive far-field limit forces
    // α = −1, which the tail-integral route excludes
    let kos = &a["kos"]["report"];
    assert_eq!(kos["estimated"], true);
    assert!((f(&kos["plus"]["alpha"]) + 1.0).abs() < 1e-2);
    assert!(f(&kos["plus"]["bulk"]).is_finite());
    assert_eq!(a["kos"]["pass"], false);
    assert_eq!(r["admissibility_pass"], false);
    // the solve itself still goes through and is recorded
    assert_eq!(r["status"], "ok");
    assert!(f(&r["boundary_residuals"]["plus"]) < 1e-8);
    // and --strict turns the failure into a hard stop with only the report
    fs::remove_dir_all(dir.path().join("out")).unwrap();
    assert_eq!(run(&cfg, &["--strict"]), 3);
    assert_eq!(report(&dir)["status"], "admissibility_failed");
    assert!(!dir.path().join("out/solution.csv").exists());
}

#[test]
fn missing_csv_is_a_config_error_without_artifacts() {
    let body = format!(
        r#"
[problem]
preset = "custom_sampled"
csv = "does_not_exist.csv"

[discretization]
half_width = 1.0
nodes = 16

[slab]
tau = 1.0

[boundary]
plus = {{ kind = "zero" }}
minus = {{ kind = "zero" }}
{OUTPUT}"#
    );
    let (dir, cfg) = setup(&body);
    assert_eq!(run(&cfg, &[]), 2);
    assert!(!dir.path().join("out").exists());

    let (dir, cfg) = setup(&signum_power(0.5, 16, 1.0).replace(
        r#"plus = { kind = "gaussian_bump", center = 1.0, width = 0.3 }"#,
        r#"plus = { kind = "csv", path = "missing_profile.csv" }"#,
    ));
    assert_eq!(run(&cfg, &[]), 2);
    assert!(!dir.path().join("out").exists());
}

#[test]
fn custom_sampled_table_runs() {
    let (dir, cfg) = setup(&format!(
        r#"
[problem]
preset = "custom_sampled"
csv = "coeffs.csv"

[discretization]
half_width = 2.0
nodes = 32

[slab]
tau = 0.5

[boundary]
plus = {{ kind = "gaussian_bump", center = 0.5, width = 0.5 }}
minus = {{ kind = "gaussian_bump", center = -0.5, width = 0.5 }}
{OUTPUT}"#
    ));
    let mut table = String::from("mu,w,p,q\n");
    for i in 0..=200 {
        let mu = -2.0 + 4.0 * i as f64 / 200.0;
        table.push_str(&format!("{mu},{mu},1,0.5\n"));
    }
    fs::write(dir.path().join("coeffs.csv"), table).unwrap();
    assert_eq!(run(&cfg, &[]), 0);
    let r = report(&dir);
    assert_eq!(r["problem"]["preset"], "custom_sampled");
    assert!(f(&r["boundary_residuals"]["plus"]) < 1e-8);
    assert!(f(&r["boundary_residuals"]["minus"]) < 1e-8);
}

const TWO_BY_TWO: &str = r#"
[problem]
preset = "kinetic"
t = [1.0, -1.0]
a = [[2.0, 1.0], [1.0, 2.0]]

[slab]
tau = 1.0

[boundary]
plus = { kind = "values", values = [1.0, 0.0] }
minus = { kind = "values", values = [0.0, 1.0] }

[oracle]
nx = 400
extrapolate = true
"#;

#[test]
fn two_by_two_model_agrees_with_the_oracle() {
    let (dir, cfg) = setup(&format!("{TWO_BY_TWO}{OUTPUT}oracle_csv = \"out/oracle.csv\"\n"));
    assert_eq!(run(&cfg, &["--compare"]), 0);
    let r = report(&dir);
    let o = &r["oracle"];
    assert!(f(&o["max_delta"]) <= 1e-9, "{o}");
    assert_eq!(o["deltas"].as_array().unwrap().len(), 11);
    assert_eq!(r["kinetic_axioms"]["pass"], true);
    assert!(dir.path().join("out/oracle.csv").exists());
}

#[test]
fn alpha_zero_compare_is_discretization_limited() {
    let body = signum_power(0.0, 128, 4.0) + "\n[oracle]\nnx = 400\n";
    let (dir, cfg) = setup(&body);
    assert_eq!(run(&cfg, &["--compare"]), 0);
    let o = &report(&dir)["oracle"];
    assert!(f(&o["max_delta"]) <= 2e-2, "{o}");
    assert!(f(&o["l2_relative_difference"]) <= 2e-2);
}

#[test]
fn oracle_mismatch_has_its_own_exit_code() {
    let body = signum_power(0.5, 32, 2.0) + "\n[oracle]\nnx = 5\n\n[tolerances]\noracle_delta = 1e-12\n";
    let (dir, cfg) = setup(&body);
    assert_eq!(run(&cfg, &["--compare"]), 5);
    let r = report(&dir);
    assert_eq!(r["status"], "oracle_mismatch");
    assert_eq!(r["oracle"]["pass"], false);
}

#[test]
fn tau_mismatch_is_a_config_error() {
    let (dir, cfg) = setup(&format!("{TWO_BY_TWO}tau = 2.0\n{OUTPUT}"));
    assert_eq!(run(&cfg, &["--compare"]), 2);
    assert!(!dir.path().join("out").exists());
}

#[test]
fn compare_on_the_half_space_is_a_config_error() {
    let body = signum_power(0.5, 16, 1.0)
        .replace("tau = 1.0", "halfspace = true")
        .replace("minus = { kind = \"zero\" }\n", "");
    let (dir, cfg) = setup(&body);
    assert_eq!(run(&cfg, &["--compare"]), 2);
    assert!(!dir.path().join("out").exists());
    assert_eq!(run(&cfg, &[]), 0);
    let r = report(&dir);
    assert_eq!(r["problem"]["tau"], Value::Null);
    assert_eq!(r["boundary_residuals"]["minus"], 0.0);
}

#[test]
fn cache_hit_reproduces_the_solution_bit_for_bit() {
    let (dir, cfg) = setup(&signum_power(0.5, 48, 2.0));
    let cache = dir.path().join("cache");
    let flag = ["--cache-dir", cache.to_str().unwrap()];
    assert_eq!(run(&cfg, &flag), 0);
    let miss = fs::read(dir.path().join("out/solution.csv")).unwrap();
    let r1 = report(&dir);
    assert_eq!(r1["cache"]["hit"], false);
    assert_eq!(fs::read_dir(&cache).unwrap().count(), 1);

    assert_eq!(run(&cfg, &flag), 0);
    let hit = fs::read(dir.path().join("out/solution.csv")).unwrap();
    let r2 = report(&dir);
    assert_eq!(r2["cache"]["hit"], true);
    assert_eq!(miss, hit);
    assert_eq!(r1["spectrum"], r2["spectrum"]);
    assert_eq!(r1["boundary_residuals"], r2["boundary_residuals"]);
}

#[test]
fn corrupt_cache_entries_are_recomputed() {
    let (dir, cfg) = setup(&signum_power(0.5, 16, 1.0));
    let cache = dir.path().join("cache");
    let flag = ["--cache-dir", cache.to_str().unwrap()];
    assert_eq!(run(&cfg, &flag), 0);
    let clean = fs::read(dir.path().join("out/solution.csv")).unwrap();
    let entry = fs::read_dir(&cache).unwrap().next().unwrap().unwrap().path();
    fs::write(&entry, "garbage").unwrap();
    assert_eq!(run(&cfg, &flag), 0);
    assert_eq!(report(&dir)["cache"]["hit"], false);
    assert_eq!(fs::read(dir.path().join("out/solution.csv")).unwrap(), clean);
}

#[test]
fn repeated_runs_are_identical() {
    let body = format!(
        r#"
[problem]
preset = "random_jpositive"
n = 12
seed = 7

[slab]
tau = 0.5

[boundary]
plus = {{ kind = "eigenmode", index = 8 }}
minus = {{ kind = "eigenmode", index = 2, scale = -0.5 }}

[forcing]
kind = "constant"
profile = {{ kind = "values", values = [1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 1] }}
{OUTPUT}"#
    );
    let (dir, cfg) = setup(&body);
    let mut outputs = Vec::new();
    for _ in 0..2 {
        assert_eq!(run(&cfg, &[]), 0);
        outputs.push((
            fs::read(dir.path().join("out/solution.csv")).unwrap(),
            fs::read(dir.path().join("out/report.json")).unwrap(),
        ));
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn check_mode_writes_only_the_report() {
    let (dir, cfg) = setup(&signum_power(1.0, 32, 2.0));
    assert_eq!(run(&cfg, &["--check"]), 0);
    let r = report(&dir);
    assert_eq!(r["mode"], "check");
    assert!(r["spectrum"]["n_plus"].as_u64().unwrap() > 0);
    assert!(f(&r["gamma"]) > 0.0);
    assert_eq!(r["boundary_residuals"], Value::Null);
    assert!(!dir.path().join("out/solution.csv").exists());
}

#[test]
fn check_mode_fails_on_admissibility() {
    // no sign change: w = |μ| + 1
    let (dir, cfg) = setup(&format!(
        r#"
[problem]
preset = "custom_sampled"
csv = "coeffs.csv"

[discretization]
half_width = 1.0
nodes = 16

[slab]
tau = 1.0

[boundary]
plus = {{ kind = "zero" }}
minus = {{ kind = "zero" }}
{OUTPUT}"#
    ));
    fs::write(dir.path().join("coeffs.csv"), "mu,w,p,q\n-1,2,1,0\n0,1,1,0\n0.5,1.5,1,0\n1,2,1,0\n").unwrap();
    assert_eq!(run(&cfg, &["--check"]), 3);
    let r = report(&dir);
    assert_eq!(r["status"], "admissibility_failed");
    assert!(r["admissibility"]["turning_point_note"].is_string());
}

#[test]
fn kinetic_axiom_violation_exits_with_the_admissibility_code() {
    let body = TWO_BY_TWO.replace("[[2.0, 1.0], [1.0, 2.0]]", "[[1.0, 2.0], [2.0, 1.0]]");
    let (dir, cfg) = setup(&format!("{body}{OUTPUT}"));
    assert_eq!(run(&cfg, &[]), 3);
    let r = report(&dir);
    assert_eq!(r["status"], "kinetic_axioms_failed");
    assert_eq!(r["kinetic_axioms"]["pass"], false);
}

#[test]
fn forcing_csv_with_a_foreign_hash_is_rejected() {
    let body = TWO_BY_TWO.to_string() + "\n[forcing]\nkind = \"csv\"\npath = \"f.csv\"\n" + OUTPUT;
    let (dir, cfg) = setup(&body);
    fs::write(dir.path().join("f.csv"), "# model_hash=deadbeef\nx,f1,f2\n0,1,1\n1,1,1\n").unwrap();
    assert_eq!(run(&cfg, &[]), 2);
    assert!(!dir.path().join("out").exists());
    fs::write(dir.path().join("f.csv"), "x,f1,f2\n0,1,1\n1,0,2\n").unwrap();
    assert_eq!(run(&cfg, &[]), 0);
    assert!(f(&report(&dir)["boundary_residuals"]["plus"]) < 1e-8);
}

#[test]
fn half_space_forcing_without_decay_is_rejected() {
    let body = format!(
        r#"
[problem]
preset = "random_jpositive"
n = 4
seed = 1

[slab]
halfspace = true

[boundary]
plus = {{ kind = "values", values = [1, 1, 1, 1] }}

[forcing]
kind = "constant"
profile = {{ kind = "values", values = [1, 1, 1, 1] }}
{OUTPUT}"#
    );
    let (dir, cfg) = setup(&body);
    assert_eq!(run(&cfg, &[]), 2);
    let decaying = body.replace(
        "profile = { kind = \"values\", values = [1, 1, 1, 1] }",
        "profile = { kind = \"values\", values = [1, 1, 1, 1] }\ntail = { kind = \"exponential\", rate = 1.0 }",
    );
    fs::write(&cfg, decaying).unwrap();
    assert_eq!(run(&cfg, &[]), 0);
    let r = report(&dir);
    assert_eq!(r["problem"]["tau"], Value::Null);
}

#[test]
fn bad_flags_and_conflicting_modes_are_rejected() {
    let (_dir, cfg) = setup(&signum_power(0.5, 16, 1.0));
    assert_eq!(run(&cfg, &["--check", "--compare"]), 2);
    assert_eq!(run(&cfg, &["--bogus"]), 2);
}

#[test]
fn shipped_configs_load() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut count = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            halfrange_cli::config::RunConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            count += 1;
        }
    }
    assert!(count >= 4);
}
