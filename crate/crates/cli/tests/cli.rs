//! End-to-end checks of the installed binary: exit codes, output files,
//! stdout fallback, and determinism across thread counts.

use std::path::Path;
use std::process::{Command, Output};

fn qbias(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qbias"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

const DETECTION: &str =
    r#"{"protocol": "detection", "trials": 2000, "beta": 0.2, "master_seed": 7}"#;

#[test]
fn simulate_is_deterministic_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "run.json", DETECTION);
    let single = dir.path().join("single.csv");
    let quad = dir.path().join("quad.csv");

    let first = qbias(&["simulate", &config, "--out", single.to_str().unwrap(), "--threads", "1"]);
    let second = qbias(&["simulate", &config, "--out", quad.to_str().unwrap(), "--threads", "4"]);
    assert_eq!(first.status.code(), Some(0), "{}", String::from_utf8_lossy(&first.stderr));
    assert_eq!(second.status.code(), Some(0));

    let single_bytes = std::fs::read(&single).unwrap();
    assert_eq!(single_bytes, std::fs::read(&quad).unwrap());

    let text = String::from_utf8(single_bytes).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "protocol,policy,beta,trials,hits,rate,ci_low,ci_high,exact_rate,no_signaling_gap,seed"
    );
    let row = lines.next().unwrap();
    assert!(row.starts_with("detection,biased,2.00000000000e-1,2000,"), "{row}");
    assert!(row.contains("5.45454545455e-1"), "exact rate column: {row}");
    assert!(lines.next().is_none());

    let stdout_run = qbias(&["simulate", &config]);
    assert_eq!(stdout_run.status.code(), Some(0));
    assert_eq!(stdout_run.stdout, std::fs::read(&single).unwrap());
}

#[test]
fn out_of_range_beta_exits_2_naming_the_bound() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "bad.json",
        r#"{"protocol": "detection", "trials": 10, "beta": 1.5}"#,
    );
    let output = qbias(&["simulate", &config]);
    assert_eq!(output.status.code(), Some(2));
    assert!(
        String::from_utf8_lossy(&output.stderr).contains("[0, 1]"),
        "stderr: {}",
        String::from_utf8_lossy(&output.stderr)
    );
}

#[test]
fn unknown_config_keys_exit_2_with_the_key_named() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "typo.json",
        r#"{"protocol": "detection", "trials": 10, "trails": 10}"#,
    );
    let output = qbias(&["verify", &config]);
    assert_eq!(output.status.code(), Some(2));
    assert!(
        String::from_utf8_lossy(&output.stderr).contains("trails"),
        "stderr: {}",
        String::from_utf8_lossy(&output.stderr)
    );
}

#[test]
fn missing_config_file_exits_2() {
    let output = qbias(&["enumerate", "/nonexistent/qbias.json"]);
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn enumerate_prints_the_history_table() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "run.json", DETECTION);
    let output = qbias(&["enumerate", &config, "--format", "csv"]);
    assert_eq!(output.status.code(), Some(0));

    let text = String::from_utf8(output.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "history,weight,valence,hit,conditioned");
    assert_eq!(lines.len(), 9, "detection has eight terminal histories");
    assert_eq!(lines[1], "P=L;T=L;S=E;F=erotic,1.42857142857e-1,1.00000000000e0,true,true");
}

#[test]
fn sweep_emits_one_row_per_beta_with_exact_rates() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "run.json", DETECTION);
    let out = dir.path().join("sweep.csv");
    let output = qbias(&[
        "sweep",
        &config,
        "--betas",
        "0",
        "0.1",
        "0.2",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(0), "{}", String::from_utf8_lossy(&output.stderr));

    let text = std::fs::read_to_string(&out).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[0].contains(",5.00000000000e-1,"));
    assert!(rows[1].contains(",5.23809523810e-1,"));
    assert!(rows[2].contains(",5.45454545455e-1,"));
}

#[test]
fn verify_passes_and_reports_in_both_formats() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "run.json", DETECTION);

    let json_run = qbias(&["verify", &config, "--format", "json"]);
    assert_eq!(json_run.status.code(), Some(0), "{}", String::from_utf8_lossy(&json_run.stderr));
    let report: serde_json::Value = serde_json::from_slice(&json_run.stdout).unwrap();
    assert_eq!(report["result"], "PASS");
    assert!(report["checks"].as_array().unwrap().len() >= 6);

    let csv_run = qbias(&["verify", &config]);
    assert_eq!(csv_run.status.code(), Some(0));
    let text = String::from_utf8(csv_run.stdout).unwrap();
    assert!(text.starts_with("check,status,detail\n"));
    assert!(text.contains("intentionally violated"), "biased run notes the moved statistic");
    assert!(text.trim_end().ends_with("result,PASS,"));
}
