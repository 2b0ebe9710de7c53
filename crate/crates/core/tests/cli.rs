//! End-to-end checks of the command-line interface.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_shared-control"))
}

fn scenario(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("scenarios")
        .join(format!("{name}.scenario"))
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records()
        .map(|rec| rec.unwrap().iter().map(str::to_owned).collect())
        .collect()
}

#[test]
fn simulate_writes_trace_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["simulate", "--scenario"])
        .arg(scenario("case1"))
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    let rows = csv_rows(&dir.path().join("trace.csv"));
    assert_eq!(rows.len(), 400);
    assert_eq!(rows[0][0], "0");
    assert_eq!(rows[399][1], "1.99500000000e1");

    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["steps"], 400);
    assert_eq!(summary["mode"], "shared");
    assert_eq!(summary["collision"], false);
}

#[test]
fn simulate_mode_override_and_geometry() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args([
            "simulate",
            "--mode",
            "automation-only",
            "--dump-geometry",
            "--geometry-every",
            "100",
            "--scenario",
        ])
        .arg(scenario("case1"))
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["mode"], "automation-only");
    let geometry: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("geometry.json")).unwrap()).unwrap();
    assert_eq!(geometry.as_array().unwrap().len(), 4);
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.scenario");
    let text = std::fs::read_to_string(scenario("nominal")).unwrap() + "\nunknown_key = 1\n";
    std::fs::write(&bad, text).unwrap();
    let out = bin()
        .args(["simulate", "--scenario"])
        .arg(&bad)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown_key"));

    let missing = bin()
        .args(["simulate", "--scenario", "/nonexistent.scenario", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(code(&missing), 2);
}

#[test]
fn fis_eval_grid() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("grid.csv");
    let mut f = std::fs::File::create(&input).unwrap();
    writeln!(f, "r_y,r_x").unwrap();
    for i in 0..=50 {
        for j in 0..=50 {
            writeln!(f, "{},{}", i as f64 / 50.0, j as f64 / 50.0).unwrap();
        }
    }
    drop(f);
    let output = dir.path().join("alpha.csv");
    let out = bin()
        .arg("fis-eval")
        .arg("--input")
        .arg(&input)
        .arg("--output")
        .arg(&output)
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let rows = csv_rows(&output);
    assert_eq!(rows.len(), 2601);
    let alpha = |r: &Vec<String>| r[2].parse::<f64>().unwrap();
    assert!(alpha(&rows[0]) >= 0.9);
    assert!(alpha(&rows[2600]) <= 0.1);
    assert!(rows.iter().all(|r| (0.0..=1.0).contains(&alpha(r))));
}

#[test]
fn fis_eval_rejects_out_of_range() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("bad.csv");
    std::fs::write(&input, "0.5,1.5\n").unwrap();
    let out = bin().arg("fis-eval").arg("--input").arg(&input).output().unwrap();
    assert_eq!(code(&out), 2);
}

#[test]
fn risk_eval_from_stdin() {
    let query = r#"{
        "ego": {"s": 10.0, "d": 1.875, "v": 15.0},
        "lower": [{"x": 0.0, "y": 0.0}, {"x": 60.0, "y": 0.0}],
        "upper": [{"x": 0.0, "y": 3.75}, {"x": 60.0, "y": 3.75}],
        "neighbors": [{"role": "preceding", "s": 16.0, "v": 12.0}]
    }"#;
    let mut child = bin()
        .arg("risk-eval")
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(query.as_bytes()).unwrap();
    let out = child.wait_with_output().unwrap();
    assert_eq!(code(&out), 0);
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["r_y"], 0.0);
    let r_x = report["r_x"].as_f64().unwrap();
    assert!(r_x > 0.0 && r_x <= 1.0, "{r_x}");
    assert_eq!(report["neighbors"].as_array().unwrap().len(), 1);
}

#[test]
fn risk_eval_rejects_unknown_fields() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("q.json");
    std::fs::write(
        &input,
        r#"{"ego": {"s": 0, "d": 1, "v": 1}, "lower": [], "upper": [], "extra": 1}"#,
    )
    .unwrap();
    let out = bin().arg("risk-eval").arg("--input").arg(&input).output().unwrap();
    assert_eq!(code(&out), 2);
}

#[test]
fn sweep_writes_one_summary_per_value() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args([
            "sweep",
            "--param",
            "fault.plateau",
            "--values",
            "0.1,0.2,0.3",
            "--scenario",
        ])
        .arg(scenario("case1"))
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let listing: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let items = listing.as_array().unwrap();
    assert_eq!(items.len(), 3);
    assert_eq!(items[2]["value"], 0.3);
    for i in 0..3 {
        assert!(dir.path().join(format!("summary_{i}.json")).exists());
    }
}

#[test]
fn sweep_unknown_parameter_is_config_error() {
    let out = bin()
        .args(["sweep", "--param", "fault.nonsense", "--values", "1", "--scenario"])
        .arg(scenario("case1"))
        .output()
        .unwrap();
    assert_eq!(code(&out), 2);
}
