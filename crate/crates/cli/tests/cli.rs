use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hypercollapse"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(args: &[&str]) -> String {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn analyze_emits_profile_and_table() {
    let profile: serde_json::Value = serde_json::from_str(&stdout(&["analyze", "--rho", "[0.1,0.2,0.7]"])).unwrap();
    assert_eq!(profile["classification"], "bicritical");
    assert_eq!(profile["xi"].as_array().unwrap().len(), 1);

    let table = stdout(&["analyze", "--rho", "[0.1,0.2,0.7]", "--format", "csv", "--s-max", "2", "--s-points", "21"]);
    let mut lines = table.lines();
    assert_eq!(lines.next(), Some("s,g,g_star"));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 21);
    assert!(rows.windows(2).all(|w| w[0][1] <= w[1][1] && w[0][2] <= w[1][2]));
    assert!(rows.iter().all(|r| r[1] <= r[2] + 1e-12));
}

#[test]
fn analyze_writes_both_files_to_out_dir() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    stdout(&["analyze", "--rho", "[0,1]", "--out", out]);
    assert!(dir.path().join("profile.json").exists());
    assert!(fs::read_to_string(dir.path().join("envelope.csv")).unwrap().starts_with("s,g,g_star\n"));
}

#[test]
fn sample_then_collapse_domain_core() {
    let dir = tempfile::tempdir().unwrap();
    let text = stdout(&["sample", "--rho", "[0.3,0.7]", "--t", "0.8", "--n", "200", "--seed", "4", "--format", "csv"]);
    assert_eq!(text, stdout(&["sample", "--rho", "[0.3,0.7]", "--t", "0.8", "--n", "200", "--seed", "4", "--format", "csv"]));
    let g = dir.path().join("g.txt");
    fs::write(&g, &text).unwrap();
    let g = g.to_str().unwrap();

    let result: serde_json::Value = serde_json::from_str(&stdout(&["collapse", g])).unwrap();
    assert!(!result["identifiable_vertices"].as_array().unwrap().is_empty());
    let trace = stdout(&["collapse", g, "--format", "csv"]);
    assert!(trace.starts_with("n,patches,debris\n0,"));
    // The trace ends when patches run out.
    let last = trace.lines().last().unwrap();
    assert_eq!(last.split(',').nth(1), Some("0"));

    // Domains need a patch-free input.
    let failed = run(&["domain", g]);
    assert!(!failed.status.success());
    assert!(String::from_utf8_lossy(&failed.stderr).contains("patch"));

    let graph = dir.path().join("graph.txt");
    fs::write(&graph, "N 5\n0 1\n1 2\n2 0\n2 3\n").unwrap();
    let graph = graph.to_str().unwrap();
    let domain: serde_json::Value = serde_json::from_str(&stdout(&["domain", graph, "--vertex", "4"])).unwrap();
    assert_eq!(domain["vertices"], serde_json::json!([4]));
    assert_eq!(stdout(&["core", graph, "--format", "csv"]), "vertex\n0\n1\n2\n");
}

#[test]
fn process_path_tracks_envelope() {
    let csv = stdout(&["process", "--rho", "[0.5,0.5]", "--horizon", "2", "--n", "20000", "--points", "5", "--format", "csv"]);
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,vertices,edges,g"));
    for line in lines {
        let v: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
        assert!((v[1] - v[3]).abs() < 0.03, "{line}");
    }
}

#[test]
fn walk_and_chain_csv_headers() {
    let walks = stdout(&["walk", "--rho", "[0,1]", "--times", "0.25,1.0", "--trials", "50", "--format", "csv"]);
    assert!(walks.starts_with("trial,t,M\n"));
    assert_eq!(walks.lines().count(), 1 + 2 * 50);
    let summary: serde_json::Value =
        serde_json::from_str(&stdout(&["walk", "--rho", "[0,1]", "--times", "0.25,1.0", "--trials", "50"])).unwrap();
    assert_eq!(summary["monotone_families"], 50);

    let chain = stdout(&["chain", "--rho", "[0.3,0.7]", "--n", "30", "--t", "0.4", "--steps", "4", "--trials", "7", "--format", "csv"]);
    assert!(chain.starts_with("trial,n,Y,Z\n"));
    assert_eq!(chain.lines().count(), 1 + 7 * 5);
    for line in chain.lines().skip(1) {
        let v: Vec<u64> = line.split(',').map(|x| x.parse().unwrap()).collect();
        assert!(v[3] >= v[1], "Z_n ≥ n: {line}");
    }
}

fn write_config(dir: &Path) -> String {
    let cfg = serde_json::json!({
        "kind": "static-limit",
        "rho": [0.5, 0.5],
        "n": 2000,
        "times": [0.5],
        "trials": 20,
        "master_seed": 9,
    });
    let path = dir.join("config.json");
    fs::write(&path, cfg.to_string()).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn experiment_writes_report_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let a = dir.path().join("a");
    let names = ["report.json", "records.csv", "comparisons.csv"];
    let mut runs = Vec::new();
    for _ in 0..2 {
        let o = run(&["experiment", &cfg, "--out", a.to_str().unwrap()]);
        // 2 means the run finished but a comparison failed; at this size
        // that is expected.
        assert!(matches!(o.status.code(), Some(0 | 2)));
        runs.push(names.map(|name| fs::read(a.join(name)).unwrap()));
    }
    assert_eq!(runs[0], runs[1]);
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(a.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["schema_version"], 1);
    assert_eq!(report["config"]["trials"], 20);

    let overridden = run(&["experiment", &cfg, "--trials", "5", "--seed", "1"]);
    let report: serde_json::Value = serde_json::from_slice(&overridden.stdout).unwrap();
    assert_eq!(report["config"]["trials"], 5);
    assert_eq!(report["config"]["master_seed"], 1);
}

#[test]
fn bad_inputs_fail_cleanly() {
    for args in [
        &["analyze", "--rho", "not json"][..],
        &["analyze", "--rho", "[0.5,0.2]"],
        &["sample", "--rho", "[1]"],
        &["core", "/nonexistent/graph.txt"],
    ] {
        let o = run(args);
        assert_eq!(o.status.code(), Some(1), "{args:?}");
        assert!(String::from_utf8_lossy(&o.stderr).starts_with("error: "));
    }
}
