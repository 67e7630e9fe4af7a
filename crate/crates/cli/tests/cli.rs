use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fekete-field"))
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    bin().args(args).args(["--output-dir", dir.to_str().unwrap()]).output().unwrap()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn csv_rows(path: &Path) -> (String, Vec<Vec<f64>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().to_string();
    let rows = lines.map(|l| l.split(',').map(|c| c.parse().unwrap()).collect()).collect();
    (header, rows)
}

#[test]
fn equilibrium_example() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &["equilibrium", "--domain", "sphere", "--radius", "1", "--n", "4", "--q", "1", "--seed", "7"]);
    assert_eq!(out.status.code(), Some(0));
    let (header, rows) = csv_rows(&dir.path().join("points.csv"));
    assert!(header.starts_with("x,y,z,q"));
    assert_eq!(rows.len(), 4);
    for r in &rows {
        let norm = (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt();
        assert!((norm - 1.0).abs() <= 1e-9);
    }
    let summary = read_json(&dir.path().join("summary.json"));
    assert!((summary["energy"].as_f64().unwrap() - 3.6742346).abs() <= 1e-7);
}

#[test]
fn shells_example() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &["shells", "--radii", "0.2,0.4,0.6", "--q1", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let (header, rows) = csv_rows(&dir.path().join("charges.csv"));
    assert_eq!(header, "r,q,component");
    let q: Vec<f64> = rows.iter().map(|r| r[1]).collect();
    for (got, want) in q.iter().zip([1.0, -1.0, 1.0]) {
        assert!((got - want).abs() <= 1e-12);
    }
}

#[test]
fn trajectory_example() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &["trajectory", "--m", "1", "--v", "1", "--e", "1", "--H", "1", "--t", "0"]);
    assert_eq!(out.status.code(), Some(0));
    let (_, rows) = csv_rows(&dir.path().join("trajectory.csv"));
    assert_eq!(rows, vec![vec![0.0, 0.0, 0.0, 0.0]]);
}

#[test]
fn missing_radius_names_the_field() {
    let out = bin().args(["--validate", "equilibrium", "--n", "4"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.contains("`radius`"));
}

#[test]
fn overlapping_balls_rejected() {
    let out = bin()
        .args(["--validate", "two-balls", "--radius1", "1", "--charge1", "1", "--center2", "1.5,0,0", "--radius2", "1", "--charge2", "1"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stderr).unwrap().contains("disjoint"));
}

#[test]
fn valid_config_has_no_diagnostics() {
    let out = bin().args(["--validate", "shells", "--radii", "0.2,0.4,0.6", "--q1", "1"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stderr.is_empty());
}

#[test]
fn invalid_run_writes_nothing_and_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("out");
    let out = bin().args(["flux", "--source", "point", "--radius", "-1", "--output-dir", target.to_str().unwrap()]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(!target.join("run.json").exists());
}

#[test]
fn unknown_parameter_rejected() {
    let out = bin().args(["--validate", "shells", "--radii", "0.2", "--q1", "1", "--colour", "red"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stderr).unwrap().contains("`colour`"));
}

#[test]
fn numerical_failure_exits_3_with_partial_results() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &["equilibrium", "--domain", "ball", "--radius", "1", "--n", "30", "--max-iterations", "2", "--restarts", "1"],
    );
    assert_eq!(out.status.code(), Some(3));
    assert!(dir.path().join("points.csv").exists());
    let run = read_json(&dir.path().join("run.json"));
    assert_eq!(run["status"], "numerical_failure");
    assert_eq!(run["converged"], false);
}

#[test]
fn config_file_merges_with_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("scenario.json");
    std::fs::write(&cfg, r#"{"parameters": {"radii": [0.2, 0.4, 0.6], "q1": 1.0}}"#).unwrap();
    let out_dir = dir.path().join("out");
    let out = bin()
        .args(["--config", cfg.to_str().unwrap(), "shells", "--q1", "2", "--output-dir", out_dir.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let (_, rows) = csv_rows(&out_dir.join("charges.csv"));
    assert_eq!(rows[0][1], 2.0);
    assert_eq!(rows[1][1], -2.0);
}

#[test]
fn bad_config_json_reports_position() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("broken.json");
    std::fs::write(&cfg, "{\n  \"q1\": ,\n}").unwrap();
    let out = bin().args(["--config", cfg.to_str().unwrap(), "shells"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stderr).unwrap().contains("line 2"));
}

#[test]
fn run_manifest_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &["oscillation", "--count", "4"]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(dir.path().join("run.json")).unwrap();
    let value: Value = serde_json::from_str(&text).unwrap();
    let again: Value = serde_json::from_str(&serde_json::to_string(&value).unwrap()).unwrap();
    assert_eq!(value, again);
    for key in ["command", "parameters", "seed", "library_version", "wall_time_seconds", "status", "result", "artifacts"] {
        assert!(value.get(key).is_some(), "missing {key}");
    }
    assert_eq!(value["command"], "oscillation");
    for name in value["artifacts"].as_array().unwrap() {
        assert!(dir.path().join(name.as_str().unwrap()).exists());
    }
}

#[test]
fn grid_binary_matches_header() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &["levelset", "--source", "point", "--threshold", "1", "--resolution", "16"]);
    assert_eq!(out.status.code(), Some(0));
    let header = read_json(&dir.path().join("grid.json"));
    let res: Vec<u64> = header["resolution"].as_array().unwrap().iter().map(|v| v.as_u64().unwrap()).collect();
    let nodes = (res[0] * res[1] * res[2]) as usize;
    assert_eq!(std::fs::metadata(dir.path().join("grid.bin")).unwrap().len() as usize, 8 * nodes);
    assert_eq!(std::fs::metadata(dir.path().join("labels.bin")).unwrap().len() as usize, 4 * nodes);
}

#[test]
fn thread_count_does_not_change_artifacts() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["grid", "--source", "uniform-sphere", "--r0", "0.5", "--charge", "1", "--resolution", "12"];
    let one = bin().env("FEKETE_FIELD_THREADS", "1").args(args).args(["--output-dir", a.path().to_str().unwrap()]).output().unwrap();
    let four = bin().env("FEKETE_FIELD_THREADS", "4").args(args).args(["--output-dir", b.path().to_str().unwrap()]).output().unwrap();
    assert!(one.status.success() && four.status.success());
    assert_eq!(std::fs::read(a.path().join("grid.bin")).unwrap(), std::fs::read(b.path().join("grid.bin")).unwrap());
}

#[test]
fn bad_thread_count_rejected() {
    let out = bin().env("FEKETE_FIELD_THREADS", "zero").args(["--validate", "shells", "--radii", "0.2", "--q1", "1"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}
