use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn carnot(args: &[&str], oracle: Option<&Path>) -> Output {
    let mut c = Command::new(env!("CARGO_BIN_EXE_carnot"));
    c.args(args);
    if let Some(dir) = oracle {
        c.env("CARNOT_ORACLE_DIR", dir);
    }
    c.output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn meanvalue_const_passes() {
    let o = carnot(&["meanvalue", "--solution", "const", "--m", "4", "--r", "0.5"], None);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("check mean value residual"));
}

#[test]
fn malformed_group_json_reports_location() {
    let o = carnot(&["distance", "--group", "{\"name\": heis", "--from", "0,0,0", "--to", "1,0,0"], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 1, column 10"), "{}", stderr(&o));
}

#[test]
fn unknown_group_is_invalid() {
    let o = carnot(&["kernel", "eval", "--group", "heisenberg7", "--x", "0,0,0"], None);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn wrong_dimension_is_invalid() {
    let o = carnot(&["distance", "--group", "heisenberg1", "--from", "0,0", "--to", "1,0,0"], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("expected 3"), "{}", stderr(&o));
}

#[test]
fn euclidean_bake_refused() {
    let o = carnot(&["kernel", "bake", "--group", "euclidean2"], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("analytic path exists"));
}

#[test]
fn oversized_grid_refused_with_suggestion() {
    let dir = tempfile::tempdir().unwrap();
    let grid = r#"{"h_coarse": 1e-5, "dt_ratio_coarse": 1e-4, "radius": 12.0, "t0": 0.002, "dlam": 0.05, "lam_max": 60.0,
        "rho_max": 10.0, "z_max": 8.0, "d_rho": 1e-4, "d_z": 1e-4}"#;
    let o = carnot(&["kernel", "bake", "--grid", grid], Some(dir.path()));
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("h_coarse"), "{}", stderr(&o));
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn coarse_bake_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let first = carnot(&["kernel", "bake", "--coarse"], Some(dir.path()));
    assert_eq!(first.status.code(), Some(0), "{}", stderr(&first));
    let again = carnot(&["kernel", "bake", "--coarse", "--force"], Some(dir.path()));
    assert_eq!(again.status.code(), Some(0), "{}", stderr(&again));
    assert!(stdout(&again).contains("check rebake reproduces the cached checksum: ok"));
    let sha = |o: &Output| stdout(o).lines().find(|l| l.starts_with("note: sha256")).map(String::from);
    assert_eq!(sha(&first), sha(&again));
}

#[test]
fn failing_check_exits_one_and_is_named() {
    let o = carnot(&["harnack", "invariant", "--group", "euclidean2", "--c-h", "1"], None);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("failed check: sup Q- <= C_H inf Q+"), "{}", stderr(&o));
}

#[test]
fn config_round_trip_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    let o = carnot(
        &["distance", "--group", "heisenberg1", "--from", "0,0,0", "--to", "0.3,-0.2,0.1", "--seed", "7", "--save-config", a.to_str().unwrap()],
        None,
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let o = carnot(&["run", "--config", a.to_str().unwrap(), "--save-config", b.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn same_seed_gives_identical_csv() {
    let dir = tempfile::tempdir().unwrap();
    let run = |sub: &str| {
        let out = dir.path().join(sub);
        let o = carnot(&["meanvalue", "--solution", "heat-kernel", "--samples", "3000", "--seed", "9", "--out", out.to_str().unwrap()], None);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        fs::read(out.join("carnot.csv")).unwrap()
    };
    assert_eq!(run("a"), run("b"));
}

#[test]
fn outputs_and_report_schema() {
    let dir = tempfile::tempdir().unwrap();
    let o = carnot(&["harnack", "maxprinciple", "--group", "euclidean2", "--stem", "probe", "--out", dir.path().to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for f in ["probe.json", "probe.config.json", "probe.csv", "probe.plot.py"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("probe.json")).unwrap()).unwrap();
    assert_eq!(report["schema_version"], 1);
    assert_eq!(report["command"], "harnack maxprinciple");
    assert_eq!(report["pass"], true);
    assert!(report["wall_clock_s"].as_f64().unwrap() >= 0.0);
    assert!(report["toolkit_version"].is_string());
    for q in report["quantities"].as_array().unwrap() {
        assert!(q["error"].is_number());
    }
}

#[test]
fn unsupported_schema_version_is_invalid() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("c.json");
    fs::write(&p, r#"{"schema_version": 2, "command": {"name": "selftest"}}"#).unwrap();
    let o = carnot(&["run", "--config", p.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(2));
    fs::write(&p, r#"{"schema_version": 1, "command": {"name": "meanvalue", "bogus": 1}}"#).unwrap();
    let o = carnot(&["run", "--config", p.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("bogus"));
}

#[test]
fn selftest_runs_requested_criteria() {
    let o = carnot(&["selftest", "--criterion", "1,8"], None);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("criterion 1 PASS") && out.contains("criterion 8 PASS"), "{out}");
    let o = carnot(&["selftest", "--criterion", "9"], None);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn chain_outside_cylinder_is_invalid() {
    let o = carnot(&["harnack", "chain", "--group", "euclidean2", "--z-plus", "0.9,0,0.3", "--z-minus", "-0.9,0,-0.2"], None);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}
