//! End-to-end checks of the `wavemap` binary: exit codes, artifact layout,
//! and byte-stable reruns.

use std::path::Path;
use std::process::{Command, Output};

fn wavemap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wavemap"))
        .args(args)
        .output()
        .expect("binary launches")
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path.display().to_string()
}

fn run_config_body(out_dir: &Path) -> String {
    format!(
        r#"
[experiment]
kind = "run"
[output]
dir = "{}"
[grid]
dr = 0.125
r_max = 4.0
[time]
t_end = 0.5
cfl = 0.5
[target]
kind = "sphere"
[data]
family = "zero"
"#,
        out_dir.display()
    )
}

#[test]
fn run_writes_artifacts_and_reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("artifacts");
    let config = write_config(dir.path(), "run.toml", &run_config_body(&out));

    let first = wavemap(&["run", "--config", &config]);
    assert!(first.status.success(), "stderr: {}", String::from_utf8_lossy(&first.stderr));
    let stdout = String::from_utf8_lossy(&first.stdout);
    assert!(stdout.contains("run completed"), "stdout: {stdout}");
    assert!(out.join("manifest").is_file());
    let csv1 = std::fs::read(out.join("series.csv")).unwrap();

    let second = wavemap(&["run", "--config", &config]);
    assert!(second.status.success());
    let csv2 = std::fs::read(out.join("series.csv")).unwrap();
    assert_eq!(csv1, csv2, "rerun changed series.csv bytes");
}

#[test]
fn unknown_config_key_exits_2_and_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let body = run_config_body(dir.path()).replace("dr = 0.125", "dx = 0.125");
    let config = write_config(dir.path(), "bad.toml", &body);
    let out = wavemap(&["run", "--config", &config]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("grid.dx"), "stderr: {stderr}");
}

#[test]
fn missing_config_file_exits_3_as_io_failure() {
    let out = wavemap(&["run", "--config", "/nonexistent/nowhere.toml"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("io error"));
}

#[test]
fn missing_required_argument_is_a_usage_error() {
    let out = wavemap(&["run"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn numerical_instability_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("artifacts");
    let body = format!(
        r#"
[experiment]
kind = "run"
[output]
dir = "{}"
[grid]
dr = 0.0625
r_max = 6.0
[time]
t_end = 0.5
cfl = 0.5
[target]
kind = "flat"
ambient_dim = 2
[data]
family = "gaussian"
amplitude = 2000000000.0
width = 0.3
center = 0.8
"#,
        out_dir.display()
    );
    let config = write_config(dir.path(), "blowup.toml", &body);
    let out = wavemap(&["run", "--config", &config]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("blow-up"));
    let manifest = std::fs::read_to_string(out_dir.join("manifest")).unwrap();
    assert!(manifest.contains("status = failed:"));
}

#[test]
fn convergence_rejects_too_few_levels_before_running() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "run.toml", &run_config_body(dir.path()));
    let out = wavemap(&["convergence", "--config", &config, "--levels", "2"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("levels"));
}

#[test]
fn sweep_rejects_unsorted_amplitudes() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "run.toml", &run_config_body(dir.path()));
    let out = wavemap(&["sweep", "--config", &config, "--amplitudes", "0.2,0.1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("sorted"));
}

#[test]
fn divcurl_needs_no_config_and_writes_the_corpus_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("corpus");
    let out = wavemap(&[
        "divcurl",
        "--seed",
        "3",
        "--trials",
        "3",
        "--grid",
        "8",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(out_dir.join("series.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4, "header plus one row per trial:\n{csv}");
    assert!(csv.starts_with("seed,ratio1,ratio2,bilinear_ratio,invariant_residuals\n"));
    assert!(csv.lines().nth(1).unwrap().starts_with("3,"));
}

#[test]
fn divcurl_rejects_degenerate_lattice_as_usage_error() {
    let out = wavemap(&["divcurl", "--grid", "2", "--trials", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--grid"));
}
