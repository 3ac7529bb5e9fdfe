use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_pdc-qkd"));
    c.env_remove("PDC_QKD_WORKERS");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

const EP_FLAGS: &[&str] = &[
    "--scheme", "ep", "--g", "0.1", "--eta-a", "0.5", "--eta-b", "0.5", "--eta-l", "0.2",
];

fn with(extra: &[&str]) -> Vec<String> {
    let mut v: Vec<String> = Vec::new();
    v.push(extra[0].to_string());
    v.extend(EP_FLAGS.iter().map(|s| s.to_string()));
    v.extend(extra[1..].iter().map(|s| s.to_string()));
    v
}

fn run_owned(args: &[String]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn error_json(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text
        .lines()
        .find(|l| l.starts_with('{'))
        .unwrap_or_else(|| panic!("no error block in {text}"));
    serde_json::from_str(line).unwrap()
}

#[test]
fn analytic_csv_to_stdout() {
    let out = run_owned(&with(&["analytic"]));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert!(lines
        .next()
        .unwrap()
        .starts_with("sweep_param,sweep_value,r_key_mc,r_key_se,r_key_oracle,"));
    let row = lines.next().unwrap();
    assert!(row.starts_with("none,,,,"), "{row}");
    assert!(lines.next().is_none());
}

#[test]
fn sweep_output_is_reproducible() {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for (dir, workers) in dirs.iter().zip(["1", "3"]) {
        let args = with(&[
            "sweep",
            "--trials",
            "20000",
            "--seed",
            "5",
            "--workers",
            workers,
            "--attack",
            "pns",
            "--sweep",
            "eta_l=0.1:0.3:3",
            "--format",
            "json",
            "--output",
            "out.json",
        ]);
        let out = bin().args(&args).current_dir(dir.path()).output().unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let a = std::fs::read(dirs[0].path().join("out.json")).unwrap();
    assert_eq!(a, std::fs::read(dirs[1].path().join("out.json")).unwrap());
    let doc: Value = serde_json::from_slice(&a).unwrap();
    assert_eq!(doc["schema_version"], 1);
    assert_eq!(doc["config"]["truncation_order"], 2);
    assert_eq!(doc["config"]["seed"], 5);
    let rows = doc["rows"].as_array().unwrap();
    let xs: Vec<f64> = rows.iter().map(|r| r["sweep_value"].as_f64().unwrap()).collect();
    assert_eq!(xs.len(), 3);
    assert!(xs.windows(2).all(|w| w[0] < w[1]));
    assert!(rows.iter().all(|r| r["p_ae_mc"].is_number()));
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        "scheme = \"wcs\"\ntrials = 1000\n[channel]\neta_a = 1.0\neta_b = 0.5\neta_l = 0.2\n[wcs]\nmu_prime = 0.1\n\
         [output]\nformat = \"json\"\n",
    )
    .unwrap();
    let out = run(&["simulate", "--config", cfg.to_str().unwrap(), "--trials", "3000"]);
    assert!(out.status.success());
    let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["config"]["trials"], 3000);
    assert_eq!(doc["rows"][0]["r_err_mc"], 0.0);
}

#[test]
fn exclusive_gain_fields_rejected() {
    let out = run_owned(&with(&["analytic", "--mu", "0.02"]));
    assert_eq!(out.status.code(), Some(2));
    let e = error_json(&out);
    assert_eq!(e["error"]["kind"], "config");
    let issue = &e["error"]["issues"][0];
    assert_eq!(issue["field"], "ep.g, ep.mu");
    assert_eq!(issue["origins"][0]["flag"], "g");
    assert_eq!(issue["origins"][1]["flag"], "mu");
}

#[test]
fn out_of_range_rejected() {
    let out = run(&[
        "analytic", "--scheme", "ep", "--g", "0.1", "--eta-a", "0.5", "--eta-b", "0.5", "--eta-l", "1.5",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let e = error_json(&out);
    assert_eq!(e["error"]["issues"][0]["field"], "channel.eta_l");
}

#[test]
fn unknown_key_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "scheme = \"ep\"\n[channel]\neta_a = 0.5\netaa = 1\n").unwrap();
    let out = run(&["analytic", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let e = error_json(&out);
    assert_eq!(e["error"]["line"], 4);
    assert!(e["error"]["message"].as_str().unwrap().contains("etaa"));
}

#[test]
fn failing_point_identified() {
    let out = run_owned(&with(&["sweep", "--trials", "0", "--sweep", "eta_a=0.5,1.5"]));
    assert_eq!(out.status.code(), Some(1));
    let e = error_json(&out);
    assert_eq!(e["error"]["kind"], "point");
    assert_eq!(e["error"]["point"]["value"], 1.5);
}

#[test]
fn sweep_requires_axis() {
    let out = run_owned(&with(&["sweep"]));
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_json(&out)["error"]["issues"][0]["field"], "sweep");
}

#[test]
fn compare_prints_verdict() {
    let out = run_owned(&with(&["compare", "--trials", "200000", "--seed", "3"]));
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("r_key") && text.contains("epsilon"));
    assert!(text.lines().last().unwrap().starts_with("overall: PASS"), "{text}");
    // an impossible threshold flips the verdict but not the exit code
    let out = run_owned(&with(&["compare", "--trials", "200000", "--seed", "3", "--sigma", "0"]));
    assert!(out.status.success());
    assert!(String::from_utf8(out.stdout).unwrap().contains("overall: FAIL"));
}

#[test]
fn io_error_is_reported() {
    let out = run_owned(&with(&["analytic", "--output", "/nonexistent/dir/x.csv"]));
    assert_eq!(out.status.code(), Some(1));
    let e = error_json(&out);
    assert_eq!(e["error"]["kind"], "io");
    assert!(e["error"]["message"]
        .as_str()
        .unwrap()
        .contains("/nonexistent/dir/x.csv"));
    assert!(!Path::new("/nonexistent/dir/x.csv").exists());
}

#[test]
fn usage_errors_exit_nonzero() {
    let out = run(&["simulate", "--eta-a", "abc"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_json(&out)["error"]["kind"], "usage");
    assert!(run(&["--help"]).status.success());
}
