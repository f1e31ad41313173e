use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn symlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_symlab")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn run(command: &str, config: &Path, out: &Path) -> Output {
    symlab(&[command, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap(), "--quiet"])
}

const CIRCLE: &str = r#"{
  "command": "identities",
  "curve": { "a0": 1.0 },
  "h_max": 0.05,
  "degree": 2
}"#;

#[test]
fn identities_on_unit_circle() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.json", CIRCLE);
    let out = tmp.path().join("out");
    let o = run("identities", &cfg, &out);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    assert_eq!(csv.lines().count(), 11);
    assert!(out.join("plots/identities.svg").exists());
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config_hash"].as_str().unwrap().len(), 64);
    assert!(manifest["wall_time_seconds"].as_f64().unwrap() >= 0.0);
    let results: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("results.json")).unwrap()).unwrap();
    assert_eq!(results["schema"], "1");
    assert_eq!(results["status"], "pass");
}

#[test]
fn negative_h_max_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "bad.json", "{\n  \"curve\": { \"a0\": 1.0 },\n  \"h_max\": -1\n}\n");
    let o = run("solve", &cfg, &tmp.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("bad.json:3"), "{err}");
    assert!(err.contains("h_max"), "{err}");
}

#[test]
fn unknown_key_reports_line() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "bad.json", "{\n  \"curve\": { \"a0\": 1.0 },\n  \"hmax\": 0.05\n}\n");
    let o = run("solve", &cfg, &tmp.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("bad.json:3:"), "{err}");
    assert!(err.contains("hmax"), "{err}");
}

#[test]
fn malformed_json_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "bad.json", "{\n  \"curve\": { \"a0\": 1.0 ,\n}\n");
    assert_eq!(run("solve", &cfg, &tmp.path().join("out")).status.code(), Some(2));
}

#[test]
fn results_are_byte_identical_across_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "r.json",
        r#"{ "curve": { "a0": 1.0, "cos": [0.0, 0.1] }, "h_max": 0.05 }"#,
    );
    let first = tmp.path().join("a");
    let second = tmp.path().join("b");
    assert_eq!(run("report", &cfg, &first).status.code(), Some(0));
    assert_eq!(run("report", &cfg, &second).status.code(), Some(0));
    let a = std::fs::read(first.join("results.json")).unwrap();
    let b = std::fs::read(second.join("results.json")).unwrap();
    assert_eq!(a, b);
    // warm rerun served from the cache
    assert_eq!(run("report", &cfg, &first).status.code(), Some(0));
    assert_eq!(a, std::fs::read(first.join("results.json")).unwrap());
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(first.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["cache"]["hits"], 1);
}

#[test]
fn sweep_reports_slopes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "s.json",
        r#"{ "command": "sweep", "family": { "mode": 2 }, "epsilons": [0.02, 0.04, 0.06, 0.08] }"#,
    );
    let out = tmp.path().join("out");
    let o = run("sweep", &cfg, &out);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let results: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("results.json")).unwrap()).unwrap();
    let fits = results["results"]["sweep"]["fitted_exponents"].as_array().unwrap();
    let serrin = fits.iter().find(|f| f["deficit"] == "serrin_l2").unwrap();
    assert!(serrin["fit"]["slope"].as_f64().unwrap() >= 0.9);
}

#[test]
fn analytic_flags_two_dimensional_gradient_constant() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "a.json", r#"{ "command": "analytic", "seed": 3 }"#);
    let out = tmp.path().join("out");
    let o = symlab(&["analytic", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("gradient-constant-N2"), "{err}");
    let results: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("results.json")).unwrap()).unwrap();
    let failed: Vec<&str> = results["checks"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|c| c["passed"] == false)
        .map(|c| c["name"].as_str().unwrap())
        .collect();
    assert_eq!(failed, ["gradient-constant-N2"]);
    assert_eq!(results["results"]["seed"], 3);
}

#[test]
fn command_mismatch_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.json", CIRCLE);
    assert_eq!(run("solve", &cfg, &tmp.path().join("out")).status.code(), Some(2));
}
