use std::path::Path;
use std::process::Command;

const BIN: &str = env!("CARGO_BIN_EXE_ab-homotopy");

fn run(dir: &Path, args: &[&str]) -> i32 {
    Command::new(BIN).current_dir(dir).args(args).output().unwrap().status.code().unwrap()
}

fn scenario(dir: &Path, name: &str, body: &str) -> String {
    std::fs::write(dir.join(name), body).unwrap();
    name.to_string()
}

fn read(dir: &Path, out: &str, file: &str) -> Vec<u8> {
    std::fs::read(dir.join(out).join(file)).unwrap_or_else(|e| panic!("{out}/{file}: {e}"))
}

#[test]
fn fig1_rows_and_zero_flux() {
    let t = tempfile::tempdir().unwrap();
    let s = scenario(t.path(), "s.json", r#"{"schema_version": 1}"#);
    assert_eq!(run(t.path(), &["fig1", "--scenario", &s, "--out", "a"]), 0);
    let text = String::from_utf8(read(t.path(), "a", "fig1.csv")).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 5 * 3);
    for r in rows {
        let f: Vec<f64> = r.split(',').map(|x| x.parse().unwrap()).collect();
        if f[1] == 0.0 {
            assert!(f[2] <= 1e-9 && f[3] <= 1e-9, "{r}");
        }
    }
}

#[test]
fn every_command_is_byte_reproducible() {
    let t = tempfile::tempdir().unwrap();
    let s = scenario(
        t.path(),
        "s.json",
        r#"{"schema_version": 1, "seed": 5, "design": {"noise_level": 0.01},
            "hausdorff": {"monitor_samples": 500, "monitor_steps": 20, "ladder": {"delta_x0": 0.1, "count": 3}}}"#,
    );
    for out in ["a", "b"] {
        assert_eq!(run(t.path(), &["fig1", "--scenario", &s, "--out", out]), 0);
        assert_eq!(run(t.path(), &["experiment", "--scenario", &s, "--out", out]), 0);
        assert_eq!(run(t.path(), &["hausdorff", "--scenario", &s, "--out", out, "--mode", "monitored"]), 0);
    }
    assert_eq!(run(t.path(), &["experiment", "--scenario", &s, "--out", "c", "--jobs", "1"]), 0);
    for f in ["fig1.csv", "amplitudes_oracle.csv", "intensities.csv", "amplitudes_recovered.csv", "summary.json", "scaling.csv", "fit.json"] {
        assert_eq!(read(t.path(), "a", f), read(t.path(), "b", f), "{f}");
    }
    for f in ["intensities.csv", "amplitudes_recovered.csv", "summary.json"] {
        assert_eq!(read(t.path(), "a", f), read(t.path(), "c", f), "{f} with --jobs 1");
    }
    assert_eq!(run(t.path(), &["experiment", "--scenario", &s, "--out", "d", "--seed", "6"]), 0);
    assert_ne!(read(t.path(), "a", "intensities.csv"), read(t.path(), "d", "intensities.csv"));
}

#[test]
fn noiseless_experiment_recovers_oracle() {
    let t = tempfile::tempdir().unwrap();
    let s = scenario(t.path(), "s.json", r#"{"schema_version": 1}"#);
    assert_eq!(run(t.path(), &["experiment", "--scenario", &s, "--out", "a"]), 0);
    let summary: serde_json::Value = serde_json::from_slice(&read(t.path(), "a", "summary.json")).unwrap();
    assert!(summary["aligned_error"].as_f64().unwrap() < 1e-6, "{summary}");
    let header = String::from_utf8(read(t.path(), "a", "amplitudes_recovered.csv")).unwrap();
    assert!(header.starts_with("class_index,winding_vector,re,im\n"));
}

#[test]
fn exit_codes_separate_failure_kinds() {
    let t = tempfile::tempdir().unwrap();
    let bad = scenario(t.path(), "bad.json", r#"{"schema_version": 1, "array": {"spacing": -1}}"#);
    assert_eq!(run(t.path(), &["validate", "--scenario", &bad]), 2);
    assert_eq!(run(t.path(), &["experiment", "--scenario", &bad, "--out", "x"]), 2);
    assert!(!t.path().join("x").exists());
    let unknown = scenario(t.path(), "unknown.json", r#"{"schema_version": 1, "colour": "red"}"#);
    assert_eq!(run(t.path(), &["fig1", "--scenario", &unknown]), 2);
    let short = scenario(t.path(), "short.json", r#"{"schema_version": 1, "design": {"n_sets": 18}}"#);
    assert_eq!(run(t.path(), &["experiment", "--scenario", &short, "--out", "y"]), 3);
    let stalled = scenario(t.path(), "stalled.json", r#"{"schema_version": 1, "inversion": {"max_iter": 1, "n_starts": 1}}"#);
    assert_eq!(run(t.path(), &["experiment", "--scenario", &stalled, "--out", "z"]), 4);
    let ok = scenario(t.path(), "ok.json", r#"{"schema_version": 1}"#);
    assert_eq!(run(t.path(), &["validate", "--scenario", &ok]), 0);
}

#[test]
fn synthetic_hausdorff_fit_is_exact() {
    let t = tempfile::tempdir().unwrap();
    let s = scenario(t.path(), "s.json", r#"{"schema_version": 1, "hausdorff": {"mode": "synthetic", "synthetic_exponent": 1.0}}"#);
    assert_eq!(run(t.path(), &["hausdorff", "--scenario", &s, "--out", "a"]), 0);
    let fit: serde_json::Value = serde_json::from_slice(&read(t.path(), "a", "fit.json")).unwrap();
    assert!((fit["r_squared"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert!((fit["d_H"].as_f64().unwrap() - 2.0).abs() < 1e-12);
}

#[test]
fn oracle_and_experiment_fits_agree() {
    let t = tempfile::tempdir().unwrap();
    let s = scenario(t.path(), "s.json", r#"{"schema_version": 1, "hausdorff": {"ladder": {"delta_x0": 0.5, "count": 3}}}"#);
    assert_eq!(run(t.path(), &["hausdorff", "--scenario", &s, "--out", "o", "--mode", "oracle"]), 0);
    assert_eq!(run(t.path(), &["hausdorff", "--scenario", &s, "--out", "e", "--mode", "experiment"]), 0);
    let a: serde_json::Value = serde_json::from_slice(&read(t.path(), "o", "fit.json")).unwrap();
    let b: serde_json::Value = serde_json::from_slice(&read(t.path(), "e", "fit.json")).unwrap();
    let (da, db) = (a["d_H"].as_f64().unwrap(), b["d_H"].as_f64().unwrap());
    assert!((da - db).abs() < 1e-6, "{da} vs {db}");
}
