//! End-to-end tests driving the `kinsym` binary: exit codes, JSON shape,
//! determinism, and the documented oracle examples.

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn kinsym(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kinsym"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}): {:?}",
            String::from_utf8_lossy(&out.stdout)
        )
    })
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("no signal")
}

/// Compare two expression strings up to algebraic normalization.
fn assert_same_expr(got: &str, want: &str) {
    let g = kinsym_core::expr::parse(got).expect("parse got");
    let w = kinsym_core::expr::parse(want).expect("parse want");
    let diff = (g - w).expand();
    assert_eq!(diff.to_string(), "0", "{got} != {want}");
}

#[test]
fn check_projective_generator_passes() {
    let out = kinsym(&["check", "--F", "0", "--tau", "t^2", "--xi", "t*x"]);
    assert_eq!(code(&out), 0);
    let v = stdout_json(&out);
    assert_eq!(v["passed"], Value::Bool(true));
}

#[test]
fn check_wrong_sign_fails_with_witness() {
    let out = kinsym(&["check", "--F", "P*f^-1", "--tau", "t", "--xi", "x"]);
    assert_eq!(code(&out), 1);
    let v = stdout_json(&out);
    assert_eq!(v["passed"], Value::Bool(false));
    assert_eq!(v["residual"]["verdict"], "non_zero");
    let witness = &v["residual"]["witness"];
    assert!(witness["env"].is_object(), "witness carries a sample point");
    assert!(witness["value"].as_f64().unwrap().abs() > 0.0);
}

#[test]
fn check_scaling_generator_passes() {
    let out = kinsym(&["check", "--F", "P*f^-1", "--tau", "t", "--xi", "-x"]);
    assert_eq!(code(&out), 0);
    assert_eq!(stdout_json(&out)["passed"], Value::Bool(true));
}

#[test]
fn parse_error_exits_2() {
    let out = kinsym(&["check", "--F", "P*(", "--tau", "t", "--xi", "x"]);
    assert_eq!(code(&out), 2);
    assert!(!out.stderr.is_empty(), "parse errors are reported on stderr");
}

#[test]
fn pretty_output_goes_to_stderr_only() {
    let out = kinsym(&["check", "--pretty", "--F", "0", "--tau", "1", "--xi", "0"]);
    assert_eq!(code(&out), 0);
    stdout_json(&out); // stdout must stay machine-parseable
    assert!(String::from_utf8_lossy(&out.stderr).contains("PASS"));
}

#[test]
fn verify_single_table_passes() {
    let out = kinsym(&["verify-table", "2"]);
    assert_eq!(code(&out), 0);
    let v = stdout_json(&out);
    assert_eq!(v["passed"], Value::Bool(true));
    assert_eq!(v["tables"][0]["table"], 2);
}

#[test]
fn verify_unknown_table_is_a_usage_error() {
    let out = kinsym(&["verify-table", "9"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn identical_runs_emit_identical_bytes() {
    let args = ["check", "--F", "P*f^-1", "--tau", "t", "--xi", "x"];
    let a = kinsym(&args);
    let b = kinsym(&args);
    assert_eq!(a.stdout, b.stdout);

    let a = kinsym(&["verify-table", "2"]);
    let b = kinsym(&["verify-table", "2"]);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn config_file_matches_flags_and_flags_win() {
    let dir = std::env::temp_dir().join(format!("kinsym-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("run.conf");
    std::fs::write(&path, "# run config\nseed = 1\n").unwrap();
    let cfg = path.to_str().unwrap();

    let fail = ["check", "--F", "P*f^-1", "--tau", "t", "--xi", "x"];
    let via_file = kinsym(&[&["--config", cfg], &fail[..]].concat());
    let via_flag = kinsym(&[&["--seed", "1"], &fail[..]].concat());
    assert_eq!(via_file.stdout, via_flag.stdout);

    // An explicit flag overrides the file entry.
    let overridden = kinsym(&[&["--config", cfg, "--seed", "0"], &fail[..]].concat());
    let default = kinsym(&fail);
    assert_eq!(overridden.stdout, default.stdout);

    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn bad_config_is_a_usage_error() {
    let dir = std::env::temp_dir().join(format!("kinsym-cli-bad-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("bad.conf");
    std::fs::write(&path, "tolerance = 1e-9\n").unwrap();
    let out = kinsym(&[
        "--config",
        path.to_str().unwrap(),
        "check",
        "--F",
        "0",
        "--tau",
        "1",
        "--xi",
        "0",
    ]);
    assert_eq!(code(&out), 2);
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn out_of_range_instantiations_is_a_usage_error() {
    let out = kinsym(&[
        "--instantiations",
        "3",
        "check",
        "--F",
        "0",
        "--tau",
        "1",
        "--xi",
        "0",
    ]);
    assert_eq!(code(&out), 2);
}

#[test]
fn dim_oracles() {
    let out = kinsym(&["dim", "--F", "0"]);
    assert_eq!(code(&out), 0);
    let v = stdout_json(&out);
    assert_eq!(v["dim"], 8);
    assert_eq!(v["basis"].as_array().unwrap().len(), 8);

    let out = kinsym(&["dim", "--F", "exp(t)*f^2 + c^2*f"]);
    assert_eq!(code(&out), 0);
    assert_eq!(stdout_json(&out)["dim"], 1);
}

#[test]
fn dim_with_free_parameter_is_a_usage_error() {
    let out = kinsym(&["dim", "--F", "P*f^-1"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn transform_projective_point_oracle() {
    let out = kinsym(&["transform", "--map", "projective", "--point", "1,2,3,4"]);
    assert_eq!(code(&out), 0);
    let v = stdout_json(&out);
    let img: Vec<f64> = v["point_image"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_f64().unwrap())
        .collect();
    for (got, want) in img.iter().zip([-1.0, 2.0, 1.0, 4.0]) {
        assert!((got - want).abs() < 1e-12, "{img:?}");
    }
}

#[test]
fn transform_swap_force_oracle() {
    let out = kinsym(&["transform", "--map", "swap", "--F", "A*c^2"]);
    assert_eq!(code(&out), 0);
    let v = stdout_json(&out);
    assert_same_expr(v["force_image"].as_str().unwrap(), "-A*c");
}

#[test]
fn transform_explicit_map_needs_both_components() {
    let out = kinsym(&["transform", "--phi", "t", "--F", "0"]);
    assert_eq!(code(&out), 2);
    let out = kinsym(&["transform", "--F", "0"]);
    assert_eq!(code(&out), 2);
    let out = kinsym(&["transform", "--map", "no-such-map", "--F", "0"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn bracket_oracle() {
    let out = kinsym(&[
        "bracket", "--tau1", "t^2", "--xi1", "t*x", "--tau2", "1", "--xi2", "0",
    ]);
    assert_eq!(code(&out), 0);
    let v = stdout_json(&out);
    assert_same_expr(v["tau"].as_str().unwrap(), "-2*t");
    assert_same_expr(v["xi"].as_str().unwrap(), "-x");
}

#[test]
fn simulate_free_streaming_trajectory() {
    let out = kinsym(&["simulate", "--F", "0", "--state", "0,1,2,5", "--t-end", "3"]);
    assert_eq!(code(&out), 0);
    let v = stdout_json(&out);
    let end = &v["trajectory"]["end"];
    assert!((end["t"].as_f64().unwrap() - 3.0).abs() < 1e-12);
    assert!((end["x"].as_f64().unwrap() - 7.0).abs() < 1e-12);
    assert!((end["c"].as_f64().unwrap() - 2.0).abs() < 1e-12);
    assert!((end["w"].as_f64().unwrap() - 5.0).abs() < 1e-12);
}

#[test]
fn simulate_writes_trajectory_csv() {
    let dir = std::env::temp_dir().join(format!("kinsym-csv-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("traj.csv");
    let out = kinsym(&[
        "simulate",
        "--F",
        "-x",
        "--state",
        "0,1,0,1",
        "--t-end",
        "1",
        "--csv",
        path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    let v = stdout_json(&out);
    let steps = v["trajectory"]["steps"].as_u64().unwrap() as usize;
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,x,c,w"));
    assert_eq!(lines.count(), steps + 1, "one row per accepted step");
    assert!(Path::new(path.to_str().unwrap()).exists());
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn simulate_flux_is_surface_independent() {
    let out = kinsym(&[
        "simulate",
        "--F",
        "-x",
        "--datum",
        "0.4,0,0.25,0.25",
        "--boxes",
        "-3:3:-3:3",
        "--surface",
        "0.5",
        "--surface",
        "0.5 + 0.05*x",
        "--nodes",
        "36",
    ]);
    assert_eq!(code(&out), 0);
    let v = stdout_json(&out);
    assert_eq!(v["fluxes"].as_array().unwrap().len(), 2);
    let spread = v["max_rel_spread"].as_f64().unwrap();
    assert!(spread < 1e-6, "relative spread {spread}");
}

#[test]
fn simulate_without_work_is_a_usage_error() {
    let out = kinsym(&["simulate", "--F", "0"]);
    assert_eq!(code(&out), 2);
    // Surfaces without a datum are equally ill-posed.
    let out = kinsym(&["simulate", "--F", "0", "--surface", "1"]);
    assert_eq!(code(&out), 2);
}
