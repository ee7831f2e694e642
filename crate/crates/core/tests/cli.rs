use std::path::Path;
use std::process::{Command, Output};

fn rdem(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rdem"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("rdem binary runs")
}

fn run_with(dir: &Path, command: &str, config: &str) -> Output {
    let path = dir.join("run.toml");
    std::fs::write(&path, config).unwrap();
    let out = dir.join("out");
    rdem(&[command, "--config", path.to_str().unwrap(), "--out", out.to_str().unwrap()])
}

fn write_data(dir: &Path, rows: &[(f64, f64)]) {
    let mut text = String::from("t,y1\n");
    for (t, y) in rows {
        text.push_str(&format!("{t},{y}\n"));
    }
    std::fs::write(dir.join("data.csv"), text).unwrap();
}

#[test]
fn missing_config_file_is_io_error() {
    let out = rdem(&["fit", "--config", "/nonexistent/rdem.toml"]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn unknown_key_is_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_with(dir.path(), "fit", "model = \"cooling\"\nparticels = 10\n");
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_model_is_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_with(dir.path(), "simulate", "model = \"lorenz\"\n");
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("lorenz"));
}

#[test]
fn lotka_volterra_without_box_is_config_error() {
    let dir = tempfile::tempdir().unwrap();
    write_data(dir.path(), &[(1.0, 1.0)]);
    let out = run_with(dir.path(), "fit", "model = \"lotka-volterra\"\ndata = \"data.csv\"\n");
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_data_file_is_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_with(dir.path(), "fit", "model = \"cooling\"\ndata = \"absent.csv\"\n");
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn fit_without_data_is_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_with(dir.path(), "fit", "model = \"cooling\"\n");
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn impossible_observation_is_degeneracy() {
    let dir = tempfile::tempdir().unwrap();
    write_data(dir.path(), &[(0.15, 20.0), (0.3, 1e200), (0.45, 25.0)]);
    let out = run_with(
        dir.path(),
        "fit",
        "model = \"cooling\"\ndata = \"data.csv\"\n[filter]\nparticles = 200\n",
    );
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn compare_oracle_rejects_other_models() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("data.csv"), "t,y1,y2\n0.2,-1,1\n0.4,-0.9,1.1\n").unwrap();
    let out = run_with(
        dir.path(),
        "compare-oracle",
        "model = \"fitzhugh-nagumo\"\ndata = \"data.csv\"\n[filter]\nparticles = 200\n",
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn fit_writes_samples_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let sim = run_with(dir.path(), "simulate", "model = \"cooling\"\nseed = 2\n");
    assert!(sim.status.success());
    std::fs::rename(dir.path().join("out"), dir.path().join("sim")).unwrap();
    let out = run_with(
        dir.path(),
        "fit",
        "model = \"cooling\"\nseed = 2\ndata = \"sim/data.csv\"\n[filter]\nparticles = 300\n",
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let samples = std::fs::read_to_string(dir.path().join("out/samples.csv")).unwrap();
    let mut lines = samples.lines();
    assert_eq!(lines.next(), Some("theta1,theta2,sigma2"));
    assert_eq!(lines.count(), 300);
    let summary = std::fs::read_to_string(dir.path().join("out/summary.toml")).unwrap();
    assert!(summary.contains("[theta2]\nmean = "));
    assert!(String::from_utf8_lossy(&out.stderr).contains("90% credible interval"));
}

#[test]
fn flags_override_file_values() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.toml");
    std::fs::write(&path, "model = \"cooling\"\nseed = 1\n").unwrap();
    let out = dir.path().join("out");
    let status = rdem(&[
        "simulate",
        "--config",
        path.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--seed",
        "9",
        "--particles",
        "123",
        "--u2",
        "0.5",
        "--m",
        "3",
    ]);
    assert!(status.status.success());
    let manifest = std::fs::read_to_string(out.join("manifest.toml")).unwrap();
    assert!(manifest.contains("seed = 9"));
    assert!(manifest.contains("particles = 123"));
    assert!(manifest.contains("u2 = 0.5"));
    assert!(manifest.contains("m = 3"));
}
