use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use shiftkit::data::LabeledSet;
use shiftkit::synth::two_gaussians;

fn shiftkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_shiftkit")).args(args).output().unwrap()
}

fn write_data(data: &LabeledSet, path: &Path) {
    data.write_csv(fs::File::create(path).unwrap()).unwrap();
}

fn write_config(dir: &Path, body: serde_json::Value) -> String {
    let path = dir.join("config.json");
    fs::write(&path, body.to_string()).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn run_writes_one_row_per_sample_and_method() {
    let dir = tempfile::tempdir().unwrap();
    write_data(&two_gaussians(600, 0.5, 1.0, 2, 1), &dir.path().join("d.csv"));
    let config = write_config(
        dir.path(),
        serde_json::json!({
            "task": "quantification",
            "shift": "LS",
            "dataset": "d.csv",
            "classifier": {"kind": "lr"},
            "methods": ["CC", "PCC"],
            "protocol": {"n_samples": 12, "size": 50},
            "seed": 3,
        }),
    );
    let out = dir.path().join("out");
    let res = shiftkit(&["run", "--config", &config, "--out", out.to_str().unwrap()]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let csv = fs::read_to_string(out.join("results.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 12 * 2);
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert!(summary["methods"]["CC"]["AE-quant"]["mean"].is_number());
    assert!(out.join("by_shift.csv").exists());
}

#[test]
fn unknown_method_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    write_data(&two_gaussians(200, 0.5, 1.0, 2, 1), &dir.path().join("d.csv"));
    let config = write_config(
        dir.path(),
        serde_json::json!({
            "task": "quantification",
            "shift": "LS",
            "dataset": "d.csv",
            "methods": ["CC", "FOO"],
            "seed": 0,
        }),
    );
    let res = shiftkit(&["run", "--config", &config]);
    assert_eq!(res.status.code(), Some(1));
    let err = String::from_utf8_lossy(&res.stderr);
    assert!(err.contains("FOO"), "{err}");
    assert!(err.contains("PACC") && err.contains("KDEy"), "{err}");
}

#[test]
fn covariate_shift_run_and_preview() {
    let dir = tempfile::tempdir().unwrap();
    write_data(&two_gaussians(500, 0.5, 1.0, 2, 4), &dir.path().join("a.csv"));
    write_data(&two_gaussians(500, 0.3, 1.5, 2, 5), &dir.path().join("b.csv"));
    let config = write_config(
        dir.path(),
        serde_json::json!({
            "task": "calibration",
            "shift": "CS",
            "source": "a.csv",
            "target": "b.csv",
            "classifier": {"kind": "nb"},
            "methods": ["Platt", "DMCal"],
            "protocol": {"n_samples": 11, "size": 40},
            "seed": 9,
        }),
    );
    let preview = shiftkit(&["protocols", "preview", "--config", &config]);
    assert!(preview.status.success(), "{}", String::from_utf8_lossy(&preview.stderr));
    let text = String::from_utf8_lossy(&preview.stdout);
    assert_eq!(text.lines().count(), 1 + 11);

    let out = dir.path().join("cs");
    let res = shiftkit(&["run", "--config", &config, "--out", out.to_str().unwrap(), "--jobs", "2"]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let csv = fs::read_to_string(out.join("results.csv")).unwrap();
    // ECE and Brier per sample per method
    assert_eq!(csv.lines().count(), 1 + 11 * 2 * 2);
}

#[test]
fn lemma_check_reports_six_reductions() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.csv");
    write_data(&two_gaussians(200, 0.4, 1.5, 2, 8), &data);
    let report = dir.path().join("report.json");
    let res = shiftkit(&["lemma-check", "--data", data.to_str().unwrap(), "--out", report.to_str().unwrap()]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(report).unwrap()).unwrap();
    let checks = json["checks"].as_array().unwrap();
    assert_eq!(checks.len(), 6);
    assert!(checks.iter().all(|c| c["passed"] == true));
}

#[test]
fn lemma_check_rejects_single_class_data() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("one.csv");
    let mut text = String::from("f0,label\n");
    for i in 0..50 {
        text.push_str(&format!("{},1\n", i as f64 / 50.0));
    }
    fs::write(&data, text).unwrap();
    let res = shiftkit(&["lemma-check", "--data", data.to_str().unwrap()]);
    assert!(!res.status.success());
    assert_eq!(res.status.code(), Some(2));
}
