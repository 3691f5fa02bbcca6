use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn crn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_crn"))
        .args(args)
        .env_remove("CRN_TOL")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = crn(args);
    assert!(
        out.status.success(),
        "{args:?} exited {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn json(args: &[&str]) -> Value {
    serde_json::from_str(&ok(args)).unwrap()
}

fn path(name: &str) -> String {
    data(name).to_str().unwrap().to_string()
}

fn schema(file: &str) -> jsonschema::Validator {
    let text = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").join(file)).unwrap();
    jsonschema::validator_for(&serde_json::from_str(&text).unwrap()).unwrap()
}

fn assert_valid(v: &jsonschema::Validator, doc: &Value) {
    let errors: Vec<String> = v
        .iter_errors(doc)
        .map(|e| format!("{} at {}", e, e.instance_path))
        .collect();
    assert!(errors.is_empty(), "{errors:#?}");
}

fn floats(v: &Value) -> Vec<f64> {
    v.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect()
}

fn csv_rows(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    (header, rows)
}

#[test]
fn analyze_cycle_reports_tree_weights() {
    let report = json(&["analyze", &path("cycle.crn"), "--no-timestamp", "--oracle"]);
    // k3k5 + k2k5 + k2k4 = 15 + 10 + 8 and likewise for the other vertices
    for r in floats(&report["rho"]) {
        assert!((r - 33.0).abs() < 1e-12, "{r}");
    }
    assert_eq!(report["network"]["linkage_classes"], 1);
    assert_eq!(report["verdicts"]["complex_balanced"], true);
    assert_eq!(report["verdicts"]["detailed_balanced"], false);
}

#[test]
fn analyze_open_example() {
    let report = json(&["analyze", &path("ex2.crn"), "--no-timestamp"]);
    let ss = &report["steady_state"];
    assert_eq!(ss["unique"], false);
    assert_eq!(ss["set_dimension"], 1);
    assert!(ss["mass_balance_residual"].as_f64().unwrap() <= 1e-12);
    assert_eq!(report["verdicts"]["mass_conserving"], false);
}

#[test]
fn malformed_input_exits_with_input_code() {
    let out = crn(&["analyze", &path("malformed.crn")]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 1"));
    let out = crn(&["analyze", &path("missing.crn")]);
    assert_eq!(out.status.code(), Some(2));
    let out = crn(&["reduce", &path("ex2.crn"), "--delete", "C3"]);
    assert_eq!(out.status.code(), Some(2));
    let out = crn(&["steady-state", &path("pair.crn")]);
    assert_eq!(out.status.code(), Some(2));
    let out = crn(&["analyze", &path("pair.crn"), "--tol", "-1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn reports_match_schema() {
    let v = schema("report.schema.json");
    for args in [
        vec!["analyze", "cycle.crn"],
        vec!["analyze", "ex2.crn"],
        vec!["analyze", "pair.crn", "--exact"],
        vec!["steady-state", "ex2.crn"],
        vec!["reduce", "ex2.crn", "--delete", "C2"],
        vec!["reduce", "ex2.crn", "--delete", "C1", "--raw"],
        vec!["reduce", "cycle.crn", "--delete", "C2", "--balanced"],
    ] {
        let mut full: Vec<String> = args.iter().map(|s| s.to_string()).collect();
        full[1] = path(args[1]);
        let refs: Vec<&str> = full.iter().map(String::as_str).collect();
        let doc = json(&refs);
        assert!(doc["timestamp"].is_string());
        assert_valid(&v, &doc);
    }
    let v = schema("consensus.schema.json");
    assert_valid(&v, &json(&["consensus", &path("ring3.edges")]));
    assert_valid(
        &v,
        &json(&["consensus", &path("ring3.edges"), "--x0", "1,2,3", "--t-end", "5"]),
    );
}

#[test]
fn output_is_deterministic_without_timestamp() {
    for cmd in [["analyze", "ex2.crn"], ["reduce", "ex2.crn"]] {
        let mut args = vec![cmd[0].to_string(), path(cmd[1]), "--no-timestamp".into()];
        if cmd[0] == "reduce" {
            args.extend(["--delete".into(), "C2".into()]);
        }
        let refs: Vec<&str> = args.iter().map(String::as_str).collect();
        assert_eq!(ok(&refs), ok(&refs));
    }
    let sim = ["simulate", &path("ex2.crn"), "--x0", "1,1,1", "--t-end", "3"];
    assert_eq!(ok(&sim), ok(&sim));
}

#[test]
fn steady_state_of_open_example() {
    let report = json(&["steady-state", &path("ex2.crn"), "--no-timestamp"]);
    let ss = &report["steady_state"];
    assert_eq!(ss["status"], "complex_balanced");
    // k_out w2 = k_in and kf w1 = k_in + kr w2
    let w = floats(&ss["w_star"]);
    assert!((w[0] - 3.0).abs() < 1e-10 && (w[1] - 2.0).abs() < 1e-10, "{w:?}");
}

#[test]
fn reduce_open_example_to_two_vertices() {
    let report = json(&[
        "reduce",
        &path("ex2.crn"),
        "--delete",
        "C2",
        "--balanced",
        "--no-timestamp",
    ]);
    let red = &report["reduction"];
    assert_eq!(red["kept"], serde_json::json!(["X1", "0"]));
    // 6 − (−2)(−6)/6 = 4 on the kept block of [[6,−2,−4],[−6,6,0],[0,−4,4]]
    let expected = [[4.0, -4.0], [-4.0, 4.0]];
    let l_hat = red["result"]["l_hat"].as_array().unwrap();
    assert_eq!(l_hat.len(), 2);
    for (row, want) in l_hat.iter().zip(expected) {
        for (got, w) in floats(row).iter().zip(want) {
            assert!((got - w).abs() < 1e-12);
        }
    }
    assert!(red["check"]["violations"].as_array().unwrap().is_empty());

    let report = json(&[
        "reduce",
        &path("ex2.crn"),
        "--delete",
        "C1",
        "--balanced",
        "--no-timestamp",
    ]);
    assert_eq!(report["reduction"]["result"]["l_hat"].as_array().unwrap().len(), 2);
}

#[test]
fn simulate_pair_to_class_equilibrium() {
    let text = ok(&["simulate", &path("pair.crn"), "--x0", "2,0.5", "--t-end", "20"]);
    let (header, rows) = csv_rows(&text);
    assert_eq!(header, ["t", "A", "B", "G"]);
    let last = rows.last().unwrap();
    let t: f64 = last[0].parse().unwrap();
    assert_eq!(t, 20.0);
    for v in &last[1..3] {
        assert!((v.parse::<f64>().unwrap() - 1.25).abs() < 1e-6);
    }
}

#[test]
fn zero_horizon_gives_one_row() {
    let text = ok(&["simulate", &path("pair.crn"), "--x0", "2,0.5", "--t-end", "0"]);
    let (_, rows) = csv_rows(&text);
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][1].parse::<f64>().unwrap(), 2.0);
}

#[test]
fn open_example_gibbs_column_is_nonincreasing() {
    let dir = tempfile::tempdir().unwrap();
    let plot = dir.path().join("plot.json");
    let text = ok(&[
        "simulate",
        &path("ex2.crn"),
        "--x0",
        "0.5,1.7,0.4",
        "--t-end",
        "30",
        "--samples",
        "600",
        "--plot-data",
        plot.to_str().unwrap(),
    ]);
    let (header, rows) = csv_rows(&text);
    assert_eq!(header.last().unwrap(), "G");
    let g: Vec<f64> = rows.iter().map(|r| r.last().unwrap().parse().unwrap()).collect();
    assert_eq!(g.len(), 601);
    for w in g.windows(2) {
        assert!(w[1] <= w[0] + 1e-8, "{} then {}", w[0], w[1]);
    }
    assert!(g[0] > 0.1 && *g.last().unwrap() < 1e-8);

    let plot: Value = serde_json::from_str(&std::fs::read_to_string(plot).unwrap()).unwrap();
    let t = floats(&plot["t"]);
    assert!(t.len() <= 201 && t.len() > 100);
    assert_eq!(*t.last().unwrap(), 30.0);
    assert_eq!(plot["series"].as_array().unwrap().len(), 3);
}

#[test]
fn simulate_rejects_wrong_initial_state() {
    let out = crn(&["simulate", &path("ex2.crn"), "--x0", "1,1"]);
    assert_eq!(out.status.code(), Some(2));
    let out = crn(&["simulate", &path("ex2.crn"), "--x0", "1,0,1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn consensus_ring_average() {
    let report = json(&[
        "consensus",
        &path("ring3.edges"),
        "--x0",
        "1,2,3",
        "--t-end",
        "40",
        "--no-timestamp",
    ]);
    assert!((report["d_star"].as_f64().unwrap() - 2.0).abs() < 1e-14);
    for s in floats(&report["sigma"]) {
        assert!((s - 1.0).abs() < 1e-14);
    }
    for x in floats(&report["run"]["final_state"]) {
        assert!((x - 2.0).abs() < 1e-6);
    }
}

#[test]
fn tolerance_sources() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("crn.toml");
    std::fs::write(&cfg, "tol = 1e-7\n[checks]\npositivity = 1e-13\n").unwrap();
    let report = json(&["analyze", &path("pair.crn"), "--config", cfg.to_str().unwrap()]);
    assert_eq!(report["tolerances"]["rank"].as_f64(), Some(1e-7));
    assert_eq!(report["tolerances"]["positivity"].as_f64(), Some(1e-13));

    let report = json(&[
        "analyze",
        &path("pair.crn"),
        "--config",
        cfg.to_str().unwrap(),
        "--tol",
        "1e-6",
    ]);
    assert_eq!(report["tolerances"]["rank"].as_f64(), Some(1e-6));

    let out = Command::new(env!("CARGO_BIN_EXE_crn"))
        .args(["analyze", &path("pair.crn")])
        .env("CRN_TOL", "1e-5")
        .output()
        .unwrap();
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["tolerances"]["membership"].as_f64(), Some(1e-5));

    std::fs::write(&cfg, "[checks]\nbogus = 1\n").unwrap();
    let out = crn(&["analyze", &path("pair.crn"), "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}
