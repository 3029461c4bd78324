use std::path::PathBuf;
use std::process::Command as Process;

use regbl_cli::{execute, run, Command, Format, RunConfig};
use serde_json::Value;

fn problem(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../problems")
        .join(name)
}

fn report(cfg: &RunConfig) -> Value {
    execute(cfg).unwrap().to_json()
}

#[test]
fn exponent_reports_reviewer_gamma() {
    let json = report(&RunConfig::new(Command::Exponent, problem("reviewer.json")));
    assert!((json["result"]["gamma"].as_f64().unwrap() - 0.25).abs() < 1e-9);
    assert!((json["result"]["locbd_exponent"].as_f64().unwrap() - 0.5).abs() < 1e-9);
    assert_eq!(json["schema_version"], 1);
    assert_eq!(json["version"], regbl::VERSION);
    assert_eq!(json["config"]["seed"], 0);
    assert_eq!(json["config"]["random_per_dim"], 2000);
}

#[test]
fn fit_with_zero_exponents_has_slope_n() {
    let json = report(&RunConfig::new(Command::Fit, problem("trivial.json")));
    assert!((json["result"]["fit"]["slope"].as_f64().unwrap() - 2.0).abs() < 1e-9);
}

#[test]
fn malformed_problem_exits_one_with_field() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"n\": 2,\n \"maps\": [[[1, 0]]],\n \"p\": [1.5]}").unwrap();
    let out = Process::new(env!("CARGO_BIN_EXE_regbl"))
        .args(["exponent", "--problem"])
        .arg(&bad)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("p[0]"));

    std::fs::write(&bad, "{\"n\": 2,\n \"maps\": [[[1, 0]]],\n \"p\": [0.5,]}").unwrap();
    let cfg = RunConfig::new(Command::Exponent, &bad);
    assert_eq!(run(&cfg), 1);
    let err = execute(&cfg).unwrap_err().to_string();
    assert!(err.contains("line 3"), "{err}");
}

#[test]
fn resource_failures_exit_two() {
    let mut cfg = RunConfig::new(Command::Ratio, problem("loomis_whitney.json"));
    cfg.grid = Some(1 << 16);
    cfg.out = Some(tempfile::tempdir().unwrap().path().join("never.json"));
    assert_eq!(run(&cfg), 2);
}

#[test]
fn lists_must_increase() {
    let mut cfg = RunConfig::new(Command::Fit, problem("loomis_whitney.json"));
    cfg.r_list = Some(vec![8.0, 4.0, 16.0]);
    assert_eq!(run(&cfg), 1);
}

#[test]
fn missing_inputs_are_reported() {
    assert!(execute(&RunConfig::new(Command::Stability, problem("reviewer.json"))).is_err());
    assert!(execute(&RunConfig::new(Command::KakeyaSweep, problem("reviewer.json"))).is_err());
    assert!(execute(&RunConfig::new(Command::Witness, problem("kakeya_plane.json"))).is_err());
}

#[test]
fn csv_reports_carry_comment_headers() {
    let mut cfg = RunConfig::new(Command::Witness, problem("reviewer.json"));
    cfg.r_list = Some(vec![8.0]);
    let bytes = execute(&cfg).unwrap().render(Format::Csv).unwrap();
    let text = String::from_utf8(bytes).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("# regbl "));
    assert!(lines.iter().any(|l| l.starts_with("# config: ")));
    assert!(lines.contains(&"R,c0,count_0,count_1,count_2"));
}

#[test]
fn binary_writes_reports_and_honours_worker_count() {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for workers in ["1", "2"] {
        let out = dir.path().join(format!("basis-{workers}.json"));
        let status = Process::new(env!("CARGO_BIN_EXE_regbl"))
            .args(["basis", "--seed", "7", "--trials", "256", "--problem"])
            .arg(problem("reviewer.json"))
            .arg("--out")
            .arg(&out)
            .env("REGBL_WORKERS", workers)
            .status()
            .unwrap();
        assert!(status.success());
        outputs.push(std::fs::read(out).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    let json: Value = serde_json::from_slice(&outputs[0]).unwrap();
    assert_eq!(json["result"]["match"], true);
}
