use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_jsqslq")).args(args).output().unwrap()
}

fn json(args: &[&str]) -> Value {
    let out = run(args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn code(args: &[&str]) -> i32 {
    run(args).status.code().unwrap()
}

fn f(v: &Value) -> f64 {
    v.as_f64().unwrap()
}

fn means(v: &Value) -> [f64; 3] {
    let l = &v["report"]["mean_l"];
    [f(&l[0]), f(&l[1]), f(&l[2])]
}

fn gini(m: [f64; 3]) -> f64 {
    let spread: f64 = m.iter().flat_map(|a| m.iter().map(move |b| (a - b).abs())).sum();
    spread / (6.0 * m.iter().sum::<f64>())
}

#[test]
fn stability_verdicts() {
    let v = json(&["stability", "--lambda", "4", "--mu", "5,5,5"]);
    assert_eq!(v["stable"], true);
    assert!((f(&v["f_lambda"]) + 1.0 / 3.0).abs() < 1e-12);
    let pi: Vec<f64> = v["pi"].as_array().unwrap().iter().map(f).collect();
    assert_eq!(pi.len(), 12);
    assert!((pi.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    let v = json(&["stability", "--lambda", "5", "--mu", "5,5,5"]);
    assert_eq!(v["stable"], false);
}

#[test]
fn threshold_for_skewed_weights() {
    let v = json(&["threshold", "--mu", "4,5,6", "--p", "0.2,0.3,0.5"]);
    assert!((f(&v["lambda_max"]) - 5.0149).abs() <= 5e-5);
}

#[test]
fn solve_reports_means() {
    let v = json(&["solve", "--lambda", "4", "--mu", "3,5,5"]);
    let l = means(&v);
    for (x, want) in l.iter().zip([8.37, 8.31, 8.31]) {
        assert!((x - want).abs() <= 0.005, "{l:?}");
    }
    // Tabulated as the index of the two-decimal means.
    let shown = l.map(|x| (x * 100.0).round() / 100.0);
    assert!((gini(shown) - 0.0016).abs() <= 0.00005);
    assert!((f(&v["report"]["gini"]) - gini(l)).abs() < 1e-12);

    let v = json(&["solve", "--lambda", "4", "--mu", "4.5,3,5", "--q", "1,1,1"]);
    let l: Vec<f64> = v["report"]["mean_l"].as_array().unwrap().iter().map(f).collect();
    for (x, want) in l.iter().zip([48.64, 48.69, 48.62]) {
        assert!((x - want).abs() <= 0.005, "{l:?}");
    }

    let v = json(&["solve", "--lambda", "4", "--mu", "5,5,5", "--levels", "3", "--truncation", "200"]);
    assert!(f(&v["report"]["gini"]).abs() < 1e-12);
    assert_eq!(v["levels"].as_array().unwrap().len(), 7 + 3 * 12);
    assert!(f(&v["truncated"]["tv_distance"]) < 1e-8);
}

#[test]
fn config_file_with_overrides() {
    let dir = std::env::temp_dir().join(format!("jsqslq-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("c.json");
    std::fs::write(&path, r#"{"lambda": 9, "mu": [5, 5, 5], "p": [0.2, 0.3, 0.5], "q": [1, 1, 1]}"#).unwrap();
    let p = path.to_str().unwrap();
    assert_eq!(code(&["solve", "--config", p]), 3);
    let v = json(&["solve", "--config", p, "--lambda", "4"]);
    assert_eq!(f(&v["params"]["lambda"]), 4.0);
    assert_eq!(f(&v["params"]["p"][2]), 0.5);
    std::fs::write(&path, r#"{"lambda": 4, "mu": [5, 5]}"#).unwrap();
    assert_eq!(code(&["solve", "--config", p]), 2);
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn exit_codes() {
    assert_eq!(code(&["solve", "--lambda", "6", "--mu", "5,5,5"]), 3);
    assert_eq!(code(&["solve", "--lambda", "4", "--mu", "-1,5,5"]), 2);
    assert_eq!(code(&["solve", "--lambda", "4", "--mu", "5,5"]), 2);
    assert_eq!(code(&["solve", "--lambda", "4", "--mu", "5,5,5", "--p", "0.5,0.5,0.5"]), 2);
    assert_eq!(code(&["solve", "--mu", "5,5,5"]), 2);
    assert_eq!(code(&["stability", "--lambda", "4"]), 2);
    assert_eq!(code(&["reproduce-table", "--table", "0"]), 2);
    assert_eq!(code(&["simulate", "--lambda", "4", "--mu", "5,5,5", "--horizon", "10", "--warmup", "20"]), 2);
    assert_eq!(code(&["threshold", "--mu", "4,5,6", "--tol", "0"]), 2);
}

#[test]
fn simulate_is_reproducible_and_compares() {
    let args = [
        "simulate", "--lambda", "4", "--mu", "5,5,5", "--horizon", "2e4", "--warmup", "100",
        "--replications", "4", "--seed", "7",
    ];
    let a = run(&args);
    let b = run(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);

    let mut with = args.to_vec();
    with.push("--compare");
    let v = json(&with);
    let cmp = v["comparison"].as_array().unwrap();
    assert_eq!(cmp.len(), 26);
    let l1 = cmp.iter().find(|c| c["measure"] == "mean_l1").unwrap();
    assert!((f(&l1["exact"]) - 4.0 / 3.0).abs() < 1e-9);
}

#[test]
fn simulate_flags_growth() {
    let args = [
        "simulate", "--lambda", "6", "--mu", "5,5,5", "--horizon", "2e4", "--warmup", "100",
        "--replications", "3", "--compare",
    ];
    let out = run(&args);
    assert_eq!(out.status.code(), Some(3));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["estimates"]["growing"], true);
    assert!(v.get("comparison").is_none());
}

#[test]
fn reproduce_tables() {
    let out = run(&["reproduce-table", "--table", "1", "--output", "csv"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for t in ["4.90215", "5.0149", "5.17335", "4.63355"] {
        assert!(text.contains(t), "{text}");
    }

    let v = json(&["reproduce-table", "--table", "7"]);
    let row = v["rows"]
        .as_array()
        .unwrap()
        .iter()
        .find(|r| r["params"]["mu"][0] == 5.0)
        .unwrap();
    let got: Vec<f64> = row["computed"].as_array().unwrap().iter().map(f).collect();
    for (x, want) in got.iter().zip([4.0 / 3.0, 4.0 / 3.0, 4.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]) {
        assert!((x - want).abs() < 1e-9);
    }

    let out = run(&["reproduce-table", "--table", "17", "--output", "csv"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let first = text.lines().filter(|l| !l.starts_with('#')).nth(1).unwrap();
    assert!(first.ends_with(",2.20,0.85,0.95,0.526,0.283,0.191"), "{first}");
}

#[test]
fn printed_errors_set_the_exit_code() {
    let out = run(&["reproduce-table", "--table", "4"]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("listed printing error"));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["mismatches"].as_array().unwrap().iter().all(|m| m["known_erratum"] == true));
    assert_eq!(code(&["reproduce-table", "--table", "4", "--allow-errata"]), 0);
    assert_eq!(code(&["reproduce-table", "--table", "4", "--tol-cells", "0"]), 4);
}
