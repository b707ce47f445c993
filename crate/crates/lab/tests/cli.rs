use std::process::Command;

fn curvmix() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_curvmix"));
    c.env("CURVMIX_WORKERS", "1");
    c
}

#[test]
fn simulate_writes_csv_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = curvmix()
        .args(["simulate", "--model", "sos", "--L", "8", "--seed", "3", "--replicas", "2", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("simulate.csv")).unwrap();
    // eleven checkpoints per replica plus the header
    assert_eq!(csv.lines().count(), 1 + 2 * 11);
    assert!(dir.path().join("simulate.summary.json").exists());
}

#[test]
fn config_errors_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, r#"{"experiment":"coalesce","model":"sos","L":4,"h":9,"seed":1}"#).unwrap();
    let out = curvmix().args(["coalesce", "--config"]).arg(&path).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("h:"));

    std::fs::write(&path, r#"{"experiment":"coalesce","model":"sos","L":4,"seed":1,"colour":2}"#).unwrap();
    let out = curvmix().args(["coalesce", "--config"]).arg(&path).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("colour"));
}

#[test]
fn fit_reads_a_coalescence_table() {
    let dir = tempfile::tempdir().unwrap();
    let ok = curvmix()
        .args(["coalesce", "--model", "sos", "--L", "8", "--sizes", "8,16,32", "--seed", "5", "--replicas", "5", "--out"])
        .arg(dir.path())
        .status()
        .unwrap();
    assert!(ok.success());
    let out = curvmix().args(["fit", "--input"]).arg(dir.path().join("coalesce.csv")).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let fit: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let z = fit["z"].as_f64().unwrap();
    assert!(z > 1.0 && z < 3.5, "{z}");
}
