use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn privci(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_privci"))
        .args(args)
        .output()
        .expect("spawn privci")
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn generate(dir: &Path, beta: &str) -> String {
    let path = dir.join("data.csv");
    let p = path.to_str().unwrap().to_owned();
    let out = privci(&["generate", "--n", "300", "--beta", beta, "--seed", "3", "--output", &p]);
    assert!(out.status.success());
    p
}

#[test]
fn generate_then_single_tests() {
    let dir = tempfile::tempdir().unwrap();
    let data = generate(dir.path(), "1.5");
    let text = std::fs::read_to_string(&data).unwrap();
    assert_eq!(text.lines().count(), 301);

    let g = json(&privci(&["gcm", "--input", &data, "--fixed-hyperparams"]));
    let p = g["p_value"].as_f64().unwrap();
    assert!(p < 0.01, "non-private GCM should reject, p = {p}");

    let pg = json(&privci(&["priv-gcm", "--input", &data, "--epsilon", "7", "--seed", "1"]));
    assert!(pg["noise_scale"].as_f64().unwrap() > 0.0);

    let c = json(&privci(&["priv-crt", "--input", &data, "--epsilon", "2", "--m", "19"]));
    let p = c["p_value"].as_f64().unwrap();
    assert!((1..=20).any(|k| p == k as f64 / 20.0));
    assert_eq!(c["m"], 19);
}

#[test]
fn private_test_without_epsilon_fails() {
    let dir = tempfile::tempdir().unwrap();
    let data = generate(dir.path(), "0");
    let out = privci(&["priv-gcm", "--input", &data]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("--epsilon"));
}

#[test]
fn experiment_is_reproducible() {
    let args = [
        "experiment", "--test", "priv-crt", "--n", "100,200", "--beta", "0,1", "--epsilon", "2",
        "--m", "9", "--trials", "5", "--seed", "11", "--fixed-hyperparams",
    ];
    let a = json(&privci(&args));
    let b = json(&privci(&args));
    assert_eq!(a, b);
    let cells = a.as_array().unwrap();
    assert_eq!(cells.len(), 4);
    for c in cells {
        assert_eq!(c["trials"], 5);
        let rate = c["rejection_rate"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&rate));
    }
}

#[test]
fn experiment_writes_csv_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("out.csv");
    let out = privci(&[
        "experiment", "--test", "gcm", "--n", "80", "--trials", "3", "--fixed-hyperparams",
        "--format", "csv", "--output", path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let mut rdr = csv::Reader::from_path(&path).unwrap();
    assert_eq!(rdr.headers().unwrap().len(), 20);
    assert_eq!(rdr.records().count(), 1);
}

#[test]
fn invalid_experiment_config_is_rejected() {
    // CRT needs --m.
    let out = privci(&["experiment", "--test", "crt", "--n", "50", "--trials", "2"]);
    assert!(!out.status.success());
}

#[test]
fn sensitivity_audit_reports_no_violations() {
    let r = json(&privci(&["sensitivity-audit", "--n", "10", "--trials", "50", "--lambda-floor", "2,10"]));
    let rows = r["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 2);
    for row in rows {
        assert_eq!(row["pairs"], 50);
        assert!(row["gcm_max"].as_f64().unwrap() <= row["gcm_bound"].as_f64().unwrap());
    }
}
