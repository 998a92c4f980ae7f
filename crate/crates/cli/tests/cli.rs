use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn lambda(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lambda"))
        .args(args)
        .env_remove("LAMBDA_HORIZON")
        .env_remove("LAMBDA_ORACLE_SEED")
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn example() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("examples/basic.fml")
}

#[test]
fn hr_eval_reports_standard_part() {
    let v = json(&lambda(&["hr", "eval", "st((1+eps)*(1-eps))"]));
    assert_eq!(v["standard_part"], "1");
    assert_eq!(v["classification"], "finite");
    assert_eq!(v["manifest"]["horizon"], 100_000);
    assert_eq!(v["manifest"]["seed"], 0);
    assert_eq!(v["manifest"]["command"][0], "hr");

    let v = json(&lambda(&["hr", "eval", "1/omega"]));
    assert_eq!(v["classification"], "infinitesimal");
    assert_eq!(v["standard_part"], "0");
    let v = json(&lambda(&["hr", "eval", "omega^2 - omega"]));
    assert_eq!(v["classification"], "infinite");
    assert_eq!(v["standard_part"], Value::Null);
}

#[test]
fn exit_codes() {
    let out = lambda(&["hr", "eval", "1 +"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("atom"), "grammar printed: {err}");

    assert_eq!(lambda(&["hr", "eval", "1/(omega-omega)"]).status.code(), Some(1));
    assert_eq!(lambda(&["bogus"]).status.code(), Some(2));
    assert_eq!(lambda(&["project", "--m", "0", "--f", "x"]).status.code(), Some(2));
    assert_eq!(lambda(&["project", "--m", "4", "--f", "x +"]).status.code(), Some(2));
    assert_eq!(lambda(&["variational", "sweep", "--elements", "2,4,8"]).status.code(), Some(2));
    assert_eq!(lambda(&["variational", "sweep", "--elements", "2,4,7,16"]).status.code(), Some(2));
    assert_eq!(lambda(&["variational", "sweep", "--elements", "2,8,4,16"]).status.code(), Some(2));
}

#[test]
fn transfer_check_example() {
    let v = json(&lambda(&["--horizon", "20000", "transfer", "check", example().to_str().unwrap()]));
    let values: Vec<bool> = v["results"].as_array().unwrap().iter().map(|r| r["value"].as_bool().unwrap()).collect();
    assert_eq!(values, [true, false, true]);
    assert_eq!(v["results"][0]["line"], 4);

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.fml");
    std::fs::write(&bad, "{}\n---\n(forall x B (> x 0))\n").unwrap();
    let out = lambda(&["transfer", "check", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
}

#[test]
fn oracle_log_replays() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("log.jsonl");
    let out = lambda(&["--out", log.to_str().unwrap(), "oracle", "log", "omega > 5", "st(1/omega)"]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&log).unwrap();
    let lines: Vec<Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert!(lines[0].get("manifest").is_some());
    assert!(lines.len() >= 2);
    for r in &lines[1..] {
        assert!(r["label"].is_string() && r["answer"].is_boolean());
        assert!(r["mode"] == "exact" || r["mode"] == "heuristic");
    }

    let v = json(&lambda(&["--oracle-replay", log.to_str().unwrap(), "hr", "eval", "omega > 5"]));
    assert_eq!(v["value_label"], "true");

    let junk = dir.path().join("junk.jsonl");
    std::fs::write(&junk, "not json\n").unwrap();
    assert_eq!(lambda(&["--oracle-replay", junk.to_str().unwrap(), "hr", "eval", "1"]).status.code(), Some(2));
}

#[test]
fn oracle_log_csv() {
    let out = lambda(&["--format", "csv", "oracle", "log", "omega > 5"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let body: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(body[0], "label,answer,mode,witness_count");
    assert_eq!(body.len(), 2);
}

#[test]
fn project_and_derive() {
    let v = json(&lambda(&["project", "--basis", "hat", "--m", "4", "--f", "1"]));
    assert_eq!(v["basis"], "hat");
    assert_eq!(v["m"], 4);
    let c: Vec<f64> = v["coeffs"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    // Mass system with rows (1/6, 2/3, 1/6) and unit right-hand side.
    let expected = [9.0 / 7.0, 6.0 / 7.0, 9.0 / 7.0];
    for (a, b) in c.iter().zip(expected) {
        assert!((a - b).abs() < 1e-12, "{c:?}");
    }

    let v = json(&lambda(&["derive", "--basis", "sine", "--m", "3", "--f", "sin(PI*x)"]));
    let d: Vec<f64> = v["coeffs"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    // Modes sin(kπx), k < m; the derivative π cos(πx) has weight
    // 2∫ π cos(πx) sin(2πx) = 8/3 on the second mode.
    assert_eq!(d.len(), 2);
    assert!(d[0].abs() < 1e-12, "{d:?}");
    assert!((d[1] - 8.0 / 3.0).abs() < 1e-9, "{d:?}");
}

#[test]
fn sweep_json_and_csv_agree() {
    let args = ["variational", "sweep", "--elements", "2,4,8,16", "--starts", "2"];
    let v = json(&lambda(&args));
    assert_eq!(v["certificate"], "PASS");
    assert_eq!(v["levels"].as_array().unwrap().len(), 4);
    assert!((v["order_j"].as_f64().unwrap() - 2.0).abs() < 0.1);

    let mut csv_args = vec!["--format", "csv"];
    csv_args.extend_from_slice(&args);
    let out = lambda(&csv_args);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("# certificate=PASS"));
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let js: Vec<f64> = reader.records().map(|r| r.unwrap()[2].parse().unwrap()).collect();
    let expected: Vec<f64> = v["levels"].as_array().unwrap().iter().map(|l| l["j_value"].as_f64().unwrap()).collect();
    assert_eq!(js, expected);
}

#[test]
fn output_is_deterministic_apart_from_timestamps() {
    let strip = |mut v: Value| {
        v["manifest"]["timestamps"] = Value::Null;
        v
    };
    let args = ["--seed", "7", "variational", "sweep", "--elements", "2,4,6,8", "--starts", "3"];
    let a = strip(json(&lambda(&args)));
    let b = strip(json(&lambda(&args)));
    assert_eq!(a, b);
    assert_eq!(a["manifest"]["seed"], 7);
}

#[test]
fn environment_defaults() {
    let out = Command::new(env!("CARGO_BIN_EXE_lambda"))
        .args(["hr", "eval", "1"])
        .env("LAMBDA_HORIZON", "1234")
        .env("LAMBDA_ORACLE_SEED", "9")
        .output()
        .unwrap();
    let v = json(&out);
    assert_eq!(v["manifest"]["horizon"], 1234);
    assert_eq!(v["manifest"]["seed"], 9);
}
