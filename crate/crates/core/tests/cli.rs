use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn codim2(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_codim2")).args(args).output().expect("binary runs")
}

fn json_of(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("stdout is not JSON ({e}): {}", String::from_utf8_lossy(&out.stdout)))
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("codim2-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

/// Drops wall-clock fields so two runs can be compared exactly.
fn strip_runtime(v: &mut Value) {
    match v {
        Value::Object(m) => {
            m.remove("runtime_s");
            m.values_mut().for_each(strip_runtime);
        }
        Value::Array(a) => a.iter_mut().for_each(strip_runtime),
        _ => {}
    }
}

#[test]
fn lemma_fuzz_reports_zero_failures() {
    let out = codim2(&["lemma-fuzz", "--trials", "2000", "--seed", "7"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json_of(&out);
    assert_eq!(v["failures"], 0);
    assert_eq!(v["trials"], 2000);
    assert_eq!(v["config"]["seed"], 7);
    assert_eq!(v["version"], env!("CARGO_PKG_VERSION"));
    assert!(v["runtime_s"].as_f64().unwrap() >= 0.0);
}

#[test]
fn tau_is_reproducible_bit_for_bit() {
    let args = ["tau", "--example", "round-s3", "--method", "all", "--samples", "40", "--grid", "12x6", "--seed", "3"];
    let (mut a, mut b) = (json_of(&codim2(&args)), json_of(&codim2(&args)));
    strip_runtime(&mut a);
    strip_runtime(&mut b);
    assert_eq!(a, b);
    let methods: Vec<_> = a.as_array().unwrap().iter().map(|r| r["method"].as_str().unwrap().to_string()).collect();
    assert_eq!(methods, ["MorseAverage", "NormalQuadrature"]);
    assert_eq!(a[0]["config"]["common"]["seed"], 3);
}

#[test]
fn verify_product_passes_and_is_wide() {
    let path = scratch("verify.json");
    let out = codim2(&["verify", "--example", "product-s2s2", "--samples", "200", "--directions", "8", "--out", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("PASS"));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v["passed"], true);
    let wide = v["checks"].as_array().unwrap().iter().find(|c| c["name"] == "wide").expect("wide check");
    assert_eq!(wide["passed"], true);
}

#[test]
fn usage_errors_exit_with_two() {
    let out = codim2(&["verify", "--example", "klein-bottle"]);
    assert_eq!(out.status.code(), Some(2));

    let out = codim2(&["tau", "--example", "round-s3", "--params", "{\"radius\":\n oops}"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 2"), "{err}");

    let out = codim2(&["tau", "--example", "moebius", "--epsilon", "0.01"]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));

    let out = codim2(&["tau", "--example", "round-s3", "--grid", "12by6"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn classify_rows_project_to_csv() {
    let (json_path, csv_path) = (scratch("rows.json"), scratch("rows.csv"));
    let out =
        codim2(&["classify", "--example", "cylinder-quotient", "--samples", "12", "--out", json_path.to_str().unwrap(), "--csv", csv_path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rows: Value = serde_json::from_str(&std::fs::read_to_string(&json_path).unwrap()).unwrap();
    let rows = rows["rows"].as_array().or(rows.as_array()).unwrap().clone();
    assert_eq!(rows.len(), 12);
    for r in &rows {
        assert_eq!(r["stratum"], "U1");
        assert!(r["C_norm"].as_f64().unwrap() <= 1e-5);
        assert_eq!(r["composition_ok"], true);
    }
    let csv = std::fs::read_to_string(&csv_path).unwrap();
    let mut lines = csv.lines();
    let header = lines.next().unwrap();
    for col in ["point", "stratum", "mu", "nu", "C_norm", "wT", "composition_ok"] {
        assert!(header.split(',').any(|h| h == col), "missing column {col} in {header}");
    }
    assert_eq!(lines.count(), 12);

    // The report subcommand gives the same projection from the JSON alone.
    let again = scratch("again.csv");
    let out = codim2(&["report", "--input", json_path.to_str().unwrap(), "--csv", again.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(std::fs::read_to_string(&again).unwrap().lines().count(), 13);
}
