use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn sotpim(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sotpim"))
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn read_json(path: PathBuf) -> Value {
    serde_json::from_str(&fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))).unwrap()
}

fn assert_schema(name: &str, doc: &Value) {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../schemas").join(name);
    let schema = read_json(path);
    let v = jsonschema::validator_for(&schema).expect("schema compiles");
    let errs: Vec<String> = v.iter_errors(doc).map(|e| format!("{} at {}", e, e.instance_path)).collect();
    assert!(errs.is_empty(), "{name}: {errs:#?}");
}

#[test]
fn cost_matches_targets_and_schema() {
    let dir = TempDir::new().unwrap();
    let o = sotpim(dir.path(), &["cost"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let doc = read_json(dir.path().join("cost.json"));
    assert_schema("cost.schema.json", &doc);
    let r = &doc["mac_ratios"];
    assert!((r["energy"].as_f64().unwrap() - 3.3).abs() < 0.05, "{r}");
    assert!((r["latency"].as_f64().unwrap() - 1.8).abs() < 0.05, "{r}");
    let drop = doc["fast_mram_latency_drop"].as_f64().unwrap();
    assert!((drop - 0.567).abs() < 0.02, "{drop}");
    let csv = fs::read_to_string(dir.path().join("cost.csv")).unwrap();
    assert!(csv.starts_with("op,design,component,latency_ns,energy_fj\n"));
}

#[test]
fn fast_mram_lowers_latency() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    assert_eq!(code(&sotpim(a.path(), &["cost"])), 0);
    assert_eq!(code(&sotpim(b.path(), &["--fast-mram", "cost"])), 0);
    let slow = read_json(a.path().join("cost.json"))["mac"]["latency_ns"].as_f64().unwrap();
    let fast = read_json(b.path().join("cost.json"))["mac"]["latency_ns"].as_f64().unwrap();
    let drop = 1.0 - fast / slow;
    assert!((drop - 0.567).abs() < 0.02, "{drop}");
}

#[test]
fn simulate_mac_is_deterministic_and_valid() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    for d in [&a, &b] {
        let o = sotpim(d.path(), &["--seed", "7", "--layout", "5,10", "simulate-mac", "--n", "64", "--trace"]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["reconcile.csv", "trace.csv", "simulate_mac.json"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
    let doc = read_json(a.path().join("simulate_mac.json"));
    assert_schema("simulate_mac.schema.json", &doc);
    assert_eq!(doc["mismatches"], 0);
    let trace = fs::read_to_string(a.path().join("trace.csv")).unwrap();
    assert!(!sotpim::subarray::parse_trace_csv(&trace).unwrap().is_empty());
}

#[test]
fn injected_fault_fails_verification() {
    let dir = TempDir::new().unwrap();
    let o = sotpim(dir.path(), &["--layout", "5,10", "simulate-mac", "--n", "20", "--inject-fault", "3"]);
    assert_eq!(code(&o), 1);
    let doc = read_json(dir.path().join("simulate_mac.json"));
    assert_schema("simulate_mac.schema.json", &doc);
    assert_eq!(doc["mismatches"], 1);
    assert_eq!(doc["first_mismatches"][0]["index"], 3);
}

#[test]
fn reconcile_output_validates() {
    let dir = TempDir::new().unwrap();
    let o = sotpim(dir.path(), &["reconcile", "--n", "30"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let doc = read_json(dir.path().join("reconcile.json"));
    assert_schema("reconcile.schema.json", &doc);
    assert!(doc["reconciliation"].as_array().unwrap().iter().all(|r| r["flagged"] == false));
}

#[test]
fn estimate_train_output_validates() {
    let dir = TempDir::new().unwrap();
    let o = sotpim(dir.path(), &["estimate-train", "--batch", "8", "--steps", "10"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let doc = read_json(dir.path().join("estimate_train.json"));
    assert_schema("estimate_train.schema.json", &doc);
    assert_eq!(doc["total_params"], 21690);
    assert!((doc["ratios"]["area"].as_f64().unwrap() - 2.5).abs() < 0.05);
}

#[test]
fn estimate_train_reads_a_network_file() {
    let dir = TempDir::new().unwrap();
    let net = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/netspecs/xor-mlp.json");
    let o = sotpim(dir.path(), &["estimate-train", "--net", net.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(read_json(dir.path().join("estimate_train.json"))["total_params"], 42);
}

#[test]
fn train_tiny_is_deterministic() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    for d in [&a, &b] {
        assert_eq!(code(&sotpim(d.path(), &["--seed", "3", "train-tiny", "--epochs", "20"])), 0);
    }
    let la = fs::read_to_string(a.path().join("loss.csv")).unwrap();
    assert_eq!(la, fs::read_to_string(b.path().join("loss.csv")).unwrap());
    assert_eq!(la.lines().count(), 21);
    assert_schema("train_tiny.schema.json", &read_json(a.path().join("train_tiny.json")));
}

#[test]
fn zero_epochs_writes_header_only() {
    let dir = TempDir::new().unwrap();
    assert_eq!(code(&sotpim(dir.path(), &["train-tiny", "--epochs", "0"])), 0);
    assert_eq!(fs::read_to_string(dir.path().join("loss.csv")).unwrap(), "epoch,loss,accuracy\n");
    let doc = read_json(dir.path().join("train_tiny.json"));
    assert_schema("train_tiny.schema.json", &doc);
    assert_eq!(doc["final_loss"], Value::Null);
}

#[test]
fn huge_learning_rate_diverges() {
    let dir = TempDir::new().unwrap();
    let o = sotpim(dir.path(), &["train-tiny", "--epochs", "50", "--lr", "1e30"]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    let doc = read_json(dir.path().join("train_tiny.json"));
    assert_schema("train_tiny.schema.json", &doc);
    assert_eq!(doc["diverged"], true);
}

#[test]
fn config_errors_exit_2_without_output() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("nope.json");
    let o = sotpim(dir.path(), &["--calibration", missing.to_str().unwrap(), "cost"]);
    assert_eq!(code(&o), 2);
    assert!(!dir.path().join("cost.json").exists());

    assert_eq!(code(&sotpim(dir.path(), &["--layout", "8", "cost"])), 2);
    assert_eq!(code(&sotpim(dir.path(), &["--layout", "1,23", "cost"])), 2);
    assert_eq!(code(&sotpim(dir.path(), &["estimate-train", "--net", "resnet"])), 2);

    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"note": "x"}"#).unwrap();
    assert_eq!(code(&sotpim(dir.path(), &["--calibration", bad.to_str().unwrap(), "cost"])), 2);
    assert!(!dir.path().join("cost.json").exists());
}

#[test]
fn custom_calibration_round_trips() {
    let dir = TempDir::new().unwrap();
    let cal = dir.path().join("cal.json");
    fs::write(&cal, sotpim::calibration::Calibration::shipped().to_json()).unwrap();
    let a = sotpim(dir.path(), &["--calibration", cal.to_str().unwrap(), "cost"]);
    assert_eq!(code(&a), 0, "{}", String::from_utf8_lossy(&a.stderr));
    let with = fs::read(dir.path().join("cost.json")).unwrap();
    assert_eq!(code(&sotpim(dir.path(), &["cost"])), 0);
    assert_eq!(with, fs::read(dir.path().join("cost.json")).unwrap());
}
