//! Command-line behaviour: output formats and exit codes.

use std::path::Path;
use std::process::{Command, Output};

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mmwave-cs"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_json(out: &Output) -> serde_json::Value {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

const SMALL: &str = r#"{
    "name": "small",
    "arrays": {"n_bs": 16, "n_ms": 16},
    "channel": {"model": "block", "clusters": 1, "p_aoa": 1, "p_aod": 1},
    "sizing": {"rule": "ratio", "ratio": 0.5},
    "t": 72,
    "sweep": {"axis": "t", "values": [50, 72]},
    "trials": 2,
    "base_seed": 3
}"#;

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("cfg.json");
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn presets_list_and_show() {
    let out = cli(&["presets"]);
    assert!(out.status.success());
    let names = String::from_utf8(out.stdout).unwrap();
    assert!(names.lines().any(|l| l == "desk-transition-t"));
    assert_eq!(names.lines().count(), 10);
    let cfg = stdout_json(&cli(&["presets", "--preset", "full-nmse-snr"]));
    assert_eq!(cfg["arrays"]["n_bs"], 64);
    assert_eq!(cfg["sweep"]["axis"], "snr");
    assert_eq!(cli(&["presets", "--preset", "nope"]).status.code(), Some(2));
}

#[test]
fn run_prints_trial_row() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let row = stdout_json(&cli(&[
        "run",
        "--config",
        &cfg,
        "--point",
        "72",
        "--pipeline",
        "direct_cs",
        "--trial",
        "1",
    ]));
    assert_eq!(row["pipeline"], "direct_cs");
    assert_eq!(row["scheme"], "rc");
    assert_eq!(row["value"], 72.0);
    assert_eq!(row["trial"], 1);
    assert_eq!(row["success"], true);
    assert!(row["error"].is_null());
    let again = stdout_json(&cli(&[
        "run",
        "--config",
        &cfg,
        "--point",
        "72",
        "--pipeline",
        "direct_cs",
        "--trial",
        "1",
    ]));
    assert_eq!(row["nmse"], again["nmse"]);
}

#[test]
fn sweep_writes_csv_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out_dir = dir.path().join("out");
    let summary = stdout_json(&cli(&[
        "sweep",
        "--config",
        &cfg,
        "--out",
        out_dir.to_str().unwrap(),
        "--trials",
        "1",
    ]));
    assert_eq!(summary["rows"], 4);
    assert_eq!(summary["failed_trials"], 0);
    let agg = std::fs::read_to_string(out_dir.join("small_aggregate.csv")).unwrap();
    assert_eq!(agg.lines().count(), 5);
    assert!(
        agg.starts_with("axis,value,scheme,pipeline,trials,successes,success_rate,success_stderr")
    );
    let trials = std::fs::read_to_string(out_dir.join("small_trials.csv")).unwrap();
    assert_eq!(trials.lines().count(), 5);
}

#[test]
fn ric_check_reports_delta() {
    let est = stdout_json(&cli(&[
        "ric-check",
        "--rows",
        "8",
        "--cols",
        "12",
        "--k",
        "2",
        "--seed",
        "4",
    ]));
    assert_eq!(est["supports_checked"], 66);
    assert_eq!(est["exact"], true);
    assert!(est["delta"].as_f64().unwrap() > 0.0);
    assert_eq!(est["extremal_support"].as_array().unwrap().len(), 2);
    let sampled = stdout_json(&cli(&[
        "ric-check",
        "--rows",
        "8",
        "--cols",
        "12",
        "--k",
        "2",
        "--seed",
        "4",
        "--sampled",
        "10",
    ]));
    assert_eq!(sampled["exact"], false);
    // sampling supports can only miss the worst one
    assert!(sampled["delta"].as_f64().unwrap() <= est["delta"].as_f64().unwrap());
}

#[test]
fn bad_requests_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(dir.path(), &SMALL.replace("\"trials\": 2", "\"trials\": 0"));
    for args in [
        vec!["run", "--config", bad.as_str()],
        vec![
            "sweep",
            "--config",
            bad.as_str(),
            "--out",
            dir.path().to_str().unwrap(),
        ],
        vec![
            "run",
            "--preset",
            "desk-transition-t",
            "--pipeline",
            "magic",
        ],
        vec!["run", "--preset", "desk-transition-t", "--point", "10.5"],
        vec!["run"],
        vec!["ric-check", "--k", "0"],
        vec!["run", "--config", "/nonexistent/cfg.json"],
    ] {
        let out = cli(&args);
        assert_eq!(
            out.status.code(),
            Some(2),
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        assert!(String::from_utf8_lossy(&out.stderr).starts_with("error: "));
    }
}
