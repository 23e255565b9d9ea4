use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use zigzag_aloha::cli::{parse_sweep_csv, SWEEP_HEADER};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_zigzag-aloha"))
        .args(args)
        .env_remove("ZIGZAG_ALOHA_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn stdout(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn json(args: &[&str]) -> Value {
    serde_json::from_str(&stdout(args)).unwrap()
}

fn f(v: &Value) -> f64 {
    v.as_f64().unwrap_or_else(|| panic!("not a number: {v}"))
}

#[test]
fn validation_errors_exit_2() {
    for args in [
        &["solve", "--users", "0", "--pa", "0.1", "--qr", "0.5"][..],
        &["solve", "--users", "5", "--pa", "1.0", "--qr", "0.5"],
        &["solve", "--users", "5", "--pa", "0.1", "--qr", "0"],
        &["solve", "--users", "1001", "--pa", "0.1", "--qr", "0.5"],
        &["solve", "--users", "-3", "--pa", "0.1", "--qr", "0.5"],
        &["solve", "--users", "5", "--pa", "0.1", "--qr", "0.5", "--variant", "csma"],
        &["solve", "--users", "5", "--pa", "0.1"],
        &["sweep", "--axis", "pa", "--start", "0.5", "--stop", "0.1", "--step", "0.1", "--users", "5", "--qr", "0.5"],
        &["sweep", "--axis", "pa", "--start", "0.1", "--stop", "0.5", "--step", "0", "--users", "5", "--qr", "0.5"],
        &["optimize", "--users", "5", "--pa", "0.05", "--grid-step", "0.5"],
        &["simulate", "--users", "5", "--pa", "0.1", "--qr", "0.5", "--frames", "0"],
        &["bogus"],
    ] {
        let out = run(args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(out.stdout.is_empty(), "{args:?}");
        assert!(!out.stderr.is_empty(), "{args:?}");
    }
}

#[test]
fn single_user_solve() {
    for variant in ["aloha-baseline", "zigzag-paper", "zigzag-strict"] {
        let v = json(&["solve", "--users", "1", "--pa", "0.3", "--qr", "0.5", "--variant", variant]);
        assert_eq!(v["stationary"]["pi"], serde_json::json!([1.0, 0.0]));
        assert_eq!(f(&v["metrics"]["throughput_total"]), 0.3);
        assert_eq!(f(&v["metrics"]["delay_total"]), 1.0);
        assert!(v["metrics"]["delay_backlogged"].is_null());
    }
}

#[test]
fn solve_methods_agree() {
    let base = ["solve", "--users", "10", "--pa", "0.04", "--qr", "0.8"];
    let direct = json(&[&base[..], &["--method", "direct"]].concat());
    let power = json(&[&base[..], &["--method", "power-iteration"]].concat());
    let a = direct["stationary"]["pi"].as_array().unwrap();
    let b = power["stationary"]["pi"].as_array().unwrap();
    for (x, y) in a.iter().zip(b) {
        assert!((f(x) - f(y)).abs() <= 1e-8);
    }
    assert!(direct["verdict"].is_string());
}

#[test]
fn sweep_row_counts() {
    let text = stdout(&[
        "sweep", "--axis", "pa", "--start", "0.01", "--stop", "0.5", "--step", "0.01", "--users", "5", "--qr", "0.5",
    ]);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(SWEEP_HEADER));
    assert_eq!(lines.count(), 150);

    let text = stdout(&[
        "sweep", "--axis", "qr", "--start", "0.3", "--stop", "0.3", "--step", "0.05", "--users", "5", "--pa", "0.1",
    ]);
    let rows = parse_sweep_csv(&text).unwrap();
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r.axis_value == 0.3));
}

#[test]
fn sweep_csv_round_trips_against_solve() {
    let text = stdout(&[
        "sweep", "--axis", "qr", "--start", "0.1", "--stop", "0.9", "--step", "0.2", "--users", "8", "--pa", "0.05",
        "--variants", "zigzag-paper,aloha-baseline",
    ]);
    let rows = parse_sweep_csv(&text).unwrap();
    assert_eq!(rows.len(), 10);
    for r in rows {
        let v = json(&[
            "solve", "--users", "8", "--pa", "0.05", "--qr", &r.axis_value.to_string(), "--variant", r.variant.name(),
        ]);
        let m = &v["metrics"];
        assert!((f(&m["throughput_total"]) - r.throughput).abs() <= 1e-12);
        assert!((f(&m["avg_backlog"]) - r.avg_backlog).abs() <= 1e-12);
        assert!((f(&m["throughput_new"]) - r.throughput_new).abs() <= 1e-12);
        assert!((f(&m["throughput_backlogged"]) - r.throughput_backlogged).abs() <= 1e-12);
    }
}

#[test]
fn zigzag_beats_baseline_above_point_one() {
    let rows = parse_sweep_csv(&stdout(&[
        "sweep", "--axis", "pa", "--start", "0.11", "--stop", "0.5", "--step", "0.01", "--users", "5", "--qr", "0.5",
        "--variants", "aloha-baseline,zigzag-paper",
    ]))
    .unwrap();
    for pair in rows.chunks(2) {
        assert_eq!(pair[0].axis_value, pair[1].axis_value);
        assert!(pair[1].throughput >= pair[0].throughput, "{pair:?}");
    }
}

#[test]
fn sweep_writes_file_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fig.csv");
    let printed = stdout(&[
        "sweep", "--axis", "pa", "--start", "0.1", "--stop", "0.2", "--step", "0.05", "--users", "5", "--qr", "0.5",
        "--output", out.to_str().unwrap(),
    ]);
    assert!(printed.is_empty());
    assert_eq!(parse_sweep_csv(&std::fs::read_to_string(&out).unwrap()).unwrap().len(), 9);
    let meta: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("fig.csv.meta.json")).unwrap()).unwrap();
    assert_eq!(meta["spec"]["fixed"], 0.5);
    assert_eq!(meta["rows"], 9);
}

#[test]
fn out_dir_env_and_no_partial_file_on_error() {
    let dir = tempfile::tempdir().unwrap();
    let bin = env!("CARGO_BIN_EXE_zigzag-aloha");
    let ok = Command::new(bin)
        .args(["optimize", "--users", "3", "--pa", "0.1", "--grid-step", "0.1"])
        .env("ZIGZAG_ALOHA_OUT_DIR", dir.path())
        .output()
        .unwrap();
    assert!(ok.status.success());
    assert!(dir.path().join("optimize.json").exists());

    let bad = Command::new(bin)
        .args(["solve", "--users", "0", "--pa", "0.1", "--qr", "0.5"])
        .env("ZIGZAG_ALOHA_OUT_DIR", dir.path())
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
    let names: Vec<_> = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    assert_eq!(names, ["optimize.json"]);
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("solve.json");
    std::fs::write(
        &cfg,
        r#"{"description": "ignored", "users": 1, "pa": 0.2, "qr": 0.4, "variant": "zigzag-strict"}"#,
    )
    .unwrap();
    let v = json(&["solve", "--config", cfg.to_str().unwrap(), "--pa", "0.3"]);
    assert_eq!(f(&v["params"]["p_a"]), 0.3);
    assert_eq!(f(&v["params"]["q_r"]), 0.4);
    assert_eq!(v["params"]["variant"], "zigzag-strict");

    std::fs::write(&cfg, "{ not json").unwrap();
    assert_eq!(run(&["solve", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(run(&["solve", "--config", "/nonexistent/cfg.json"]).status.code(), Some(2));
}

#[test]
fn stability_drift_at_full_backlog() {
    let text = stdout(&["stability", "--users", "10", "--pa", "0.04", "--qr", "0.5,0.8"]);
    let (table, summary) = text.split_once("\n# equilibria\n").unwrap();
    let mut rows = 0;
    for line in table.lines().skip(1).filter(|l| !l.is_empty()) {
        let cols: Vec<&str> = line.split(',').collect();
        rows += 1;
        if cols[2] == "10" {
            assert!(cols[3].parse::<f64>().unwrap() <= 0.0, "{line}");
        }
    }
    assert_eq!(rows, 2 * 2 * 11);
    assert!(summary.contains("zigzag-paper,0.5,monostable"));
    assert!(summary.contains("aloha-baseline,0.8,bistable"));
}

#[test]
fn optimize_trace() {
    let v = json(&["optimize", "--users", "5", "--pa", "0.05", "--grid-step", "0.05"]);
    let trace = v["trace"].as_array().unwrap();
    assert_eq!(trace.len(), 19);
    let best = f(&v["th_star"]);
    assert!(trace.iter().all(|p| best >= f(&p[1]) - 1e-12));
}

#[test]
fn matrix_export() {
    let text = stdout(&["matrix", "--users", "2", "--pa", "0.5", "--qr", "0.5", "--variant", "aloha-baseline"]);
    let first: Vec<f64> = text.lines().next().unwrap().split(',').map(|x| x.parse().unwrap()).collect();
    assert_eq!(first, [0.75, 0.0, 0.25]);
    assert_eq!(text.lines().count(), 3);
}

#[test]
fn simulate_single_user() {
    let v = json(&[
        "simulate", "--users", "1", "--pa", "0.3", "--qr", "0.5", "--frames", "20000", "--replications", "6", "--seed", "7",
    ]);
    let mean = f(&v["throughput_mean"]);
    let se = f(&v["throughput_stderr"]);
    assert!((mean - 0.3).abs() <= 3.0 * se.max(1e-3), "{mean} ± {se}");
}

#[test]
fn simulate_analytic_compare_and_histograms() {
    let dir = tempfile::tempdir().unwrap();
    let occ = dir.path().join("occ.csv");
    let outcomes = dir.path().join("outcomes.csv");
    let v = json(&[
        "simulate", "--users", "10", "--pa", "0.1", "--qr", "0.3", "--frames", "100000", "--replications", "4",
        "--seed", "3", "--analytic-compare", "--occupancy-csv", occ.to_str().unwrap(), "--outcomes-csv",
        outcomes.to_str().unwrap(),
    ]);
    let cmp = v["analytic_compare"].as_array().unwrap();
    assert_eq!(cmp.len(), 2);
    let strict = cmp.iter().find(|c| c["variant"] == "zigzag-strict").unwrap();
    assert!(f(&strict["total_variation"]) <= 0.02);

    let occ_text = std::fs::read_to_string(&occ).unwrap();
    assert_eq!(occ_text.lines().count(), 12);
    let total: f64 = occ_text.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse::<f64>().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-9);
    assert!(read_lines(&outcomes).starts_with(&["outcome,frames".to_string()]));
}

fn read_lines(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path).unwrap().lines().map(str::to_string).collect()
}

#[test]
fn variants_listing() {
    let text = stdout(&["variants"]);
    let names: Vec<&str> = text.lines().map(|l| l.split('\t').next().unwrap()).collect();
    assert_eq!(names, ["aloha-baseline", "zigzag-paper", "zigzag-strict"]);
}

#[test]
fn scenario_files_load() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios");
    let mut seen = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let name = path.file_name().unwrap().to_str().unwrap().to_string();
        let cmd = if name.contains("stability") { "stability" } else { "sweep" };
        let out = run(&[cmd, "--config", path.to_str().unwrap()]);
        assert!(out.status.success(), "{name}: {}", String::from_utf8_lossy(&out.stderr));
        seen += 1;
    }
    assert_eq!(seen, 8);
}
