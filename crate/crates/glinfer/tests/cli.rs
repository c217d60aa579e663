//! End-to-end tests of the command line binary: each one drives the real
//! executable through a pipeline and checks outputs and exit codes.

use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_glinfer"))
}

fn workdir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("glinfer-cli-{}-{name}", std::process::id()));
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn assert_ok(out: &Output) {
    assert!(
        out.status.success(),
        "command failed ({:?}): {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn json_of(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!("bad JSON output: {e}\n{}", String::from_utf8_lossy(&out.stdout))
    })
}

#[test]
fn path_then_infer_reproduces_golden_pvalue() {
    let dir = workdir("golden");
    let y_csv = dir.join("y.csv");
    let trace = dir.join("trace.json");
    fs::write(&y_csv, "0.0\n0.0\n1.0\n1.0\n").unwrap();

    let out = bin()
        .args(["path", "--input"])
        .arg(&y_csv)
        .args(["--penalty", "d1", "--out"])
        .arg(&trace)
        .output()
        .unwrap();
    assert_ok(&out);

    let doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(&trace).unwrap()).unwrap();
    assert_eq!(doc["n"], 4);
    assert_eq!(doc["steps"].as_array().unwrap().len(), 1);
    assert_eq!(doc["steps"][0]["boundary"][0], 2);

    let out = bin()
        .args(["infer", "--trace"])
        .arg(&trace)
        .args([
            "--contrast", "segment", "--location", "2", "--sigma", "1", "--alpha", "0.05",
        ])
        .output()
        .unwrap();
    assert_ok(&out);
    let inf = json_of(&out);
    let p_one = inf["p_one"].as_f64().unwrap();
    assert!((p_one - 0.3173).abs() < 1e-3, "p_one = {p_one}");
    assert!((inf["stat"].as_f64().unwrap() - 1.0).abs() < 1e-10);
    assert_eq!(inf["location"], 2);
    assert_eq!(inf["sign"], 1);
}

#[test]
fn stepsign_renders_the_selected_model() {
    let dir = workdir("stepsign");
    let y_csv = dir.join("y.csv");
    let trace = dir.join("trace.json");
    fs::write(&y_csv, "0.0\n0.1\n-0.1\n2.0\n2.1\n1.9\n2.0\n").unwrap();

    let out = bin()
        .args(["path", "--input"])
        .arg(&y_csv)
        .args(["--penalty", "d1", "--max-steps", "1", "--out"])
        .arg(&trace)
        .output()
        .unwrap();
    assert_ok(&out);

    let out = bin()
        .args(["stepsign", "--trace"])
        .arg(&trace)
        .args(["--format", "txt"])
        .output()
        .unwrap();
    assert_ok(&out);
    let txt = String::from_utf8_lossy(&out.stdout);
    assert!(txt.contains("locations: 3(+)"), "unexpected rendering:\n{txt}");

    let out = bin()
        .args(["stepsign", "--trace"])
        .arg(&trace)
        .args(["--format", "svg"])
        .output()
        .unwrap();
    assert_ok(&out);
    let svg = String::from_utf8_lossy(&out.stdout);
    assert!(svg.starts_with("<svg"), "not an svg document:\n{svg}");
    assert!(svg.contains("3+"), "marker label missing:\n{svg}");
}

#[test]
fn estimate_sigma_recovers_small_noise() {
    let dir = workdir("sigma");
    let y_csv = dir.join("y.csv");
    let mut body = String::new();
    for i in 0..30 {
        let level = if i < 15 { 0.0 } else { 3.0 };
        let wiggle = 0.05 * ((i as f64) * 0.7).sin();
        body.push_str(&format!("{}\n", level + wiggle));
    }
    fs::write(&y_csv, body).unwrap();

    let out = bin().args(["estimate-sigma", "--input"]).arg(&y_csv).output().unwrap();
    assert_ok(&out);
    let est = json_of(&out);
    let sigma = est["sigma"].as_f64().unwrap();
    assert!(sigma >= 0.0 && sigma < 0.5, "sigma = {sigma}");
    assert!(est["step"].as_u64().is_some());
}

#[test]
fn simulate_runs_a_small_experiment() {
    let dir = workdir("simulate");
    let cfg = dir.join("config.json");
    let rows = dir.join("rows.csv");
    fs::write(
        &cfg,
        r#"{
            "scenario": {"one_jump": {"n": 14, "delta": 4.0, "loc": 7}},
            "reps": 40,
            "seed": 9,
            "filter": {"model_is": {"locations": [7]}},
            "test_location": 7,
            "alpha": 0.1
        }"#,
    )
    .unwrap();

    let out = bin()
        .args(["simulate", "--config"])
        .arg(&cfg)
        .args(["--threads", "1", "--out"])
        .arg(&rows)
        .output()
        .unwrap();
    assert_ok(&out);
    let summary = json_of(&out);
    assert_eq!(summary["total"], 40);
    assert!(summary["retained"].as_u64().unwrap() > 0);

    let body = fs::read_to_string(&rows).unwrap();
    let header = body.lines().next().unwrap();
    assert!(header.contains("p_one") && header.contains("ci_upper"), "header: {header}");
    assert!(body.lines().count() > 1);
}

#[test]
fn usage_errors_exit_with_code_two() {
    // Missing required --sigma.
    let dir = workdir("usage");
    let trace = dir.join("absent.json");
    let out = bin()
        .args(["infer", "--trace"])
        .arg(&trace)
        .args(["--contrast", "spike", "--location", "2"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    // Graph penalty without an edge list.
    let y_csv = dir.join("y.csv");
    fs::write(&y_csv, "0.0\n1.0\n2.0\n").unwrap();
    let out = bin()
        .args(["path", "--input"])
        .arg(&y_csv)
        .args(["--penalty", "graph"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn degenerate_trace_exits_with_code_three() {
    let dir = workdir("degenerate");
    let y_csv = dir.join("y.csv");
    let trace = dir.join("trace.json");
    fs::write(&y_csv, "1.5\n1.5\n1.5\n1.5\n1.5\n").unwrap();

    let out = bin()
        .args(["path", "--input"])
        .arg(&y_csv)
        .args(["--penalty", "d1", "--out"])
        .arg(&trace)
        .output()
        .unwrap();
    assert_ok(&out);

    let out = bin()
        .args(["infer", "--trace"])
        .arg(&trace)
        .args(["--contrast", "segment", "--location", "2", "--sigma", "1"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(!out.stderr.is_empty(), "expected a diagnostic on stderr");
}
