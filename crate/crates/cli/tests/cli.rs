use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_blendnet"))
}

fn networks() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../networks")
}

fn net(name: &str) -> String {
    networks().join(name).display().to_string()
}

fn golden(name: &str) -> String {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    std::fs::read_to_string(path).unwrap()
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

#[test]
fn solve_prints_allocations_and_prices() {
    let o = run(&["solve", &net("single_pipe")]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.starts_with("status      optimal"));
    for needle in ["objective", "S1", "S2", "D1", "price NG", "price H2", "binding:"] {
        assert!(out.contains(needle), "missing {needle} in\n{out}");
    }
}

#[test]
fn solve_json_is_machine_readable() {
    let o = run(&["solve", &net("eight_node.toml"), "--format", "json"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["status"], "optimal");
    assert_eq!(v["junctions"].as_array().unwrap().len(), 8);
    assert!(v["objective"].as_f64().unwrap() > 0.0);
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let o = run(&["solve", &net("single_pipe"), "--bogus"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("Usage"));
}

#[test]
fn missing_subcommand_is_a_usage_error() {
    assert_eq!(run(&[]).status.code(), Some(2));
}

#[test]
fn malformed_range_is_a_usage_error() {
    let o = run(&["sweep", &net("single_pipe"), "--target", "demand_max:D1", "--range", "100:160"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn demand_sweep_csv_has_one_row_per_grid_point() {
    let o = run(&[
        "sweep",
        &net("single_pipe"),
        "--target",
        "demand_max:D1",
        "--range",
        "100:160:1",
        "--format",
        "csv",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 62);
    assert!(lines[0].starts_with("demand_max,status,objective"));
    assert!(lines[1].starts_with("1.0000000000000000e2,optimal,"));
    assert!(lines[61].starts_with("1.6000000000000000e2,optimal,"));
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let cases: [&[&str]; 3] = [
        &["solve", &net("eight_node"), "--format", "csv"],
        &["solve", &net("single_pipe"), "--format", "json", "--jobs", "3"],
        &[
            "sweep",
            &net("single_pipe"),
            "--target",
            "carbon_price:D1",
            "--range",
            "0:0.08:0.02",
            "--format",
            "csv",
        ],
    ];
    for args in cases {
        let a = run(args);
        let b = run(args);
        assert_eq!(a.status.code(), Some(0));
        assert_eq!(a.stdout, b.stdout, "{args:?}");
    }
}

#[test]
fn output_flag_writes_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sweep.json");
    let o = run(&[
        "sweep",
        &net("single_pipe"),
        "--target",
        "gamma_min:J3",
        "--range",
        "0:0.1:0.05",
        "--format",
        "json",
        "--output",
        path.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(o.stdout.is_empty());
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v["rows"].as_array().unwrap().len(), 3);
}

#[test]
fn validate_summarizes_the_network() {
    let o = run(&["validate", &net("eight_node")]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("junctions      8  (1 slack)"));
    let o = run(&["validate", &net("single_pipe"), "--format", "csv"]);
    assert_eq!(stdout(&o).lines().next(), Some("kind,id"));
}

#[test]
fn simulate_writes_the_state_table() {
    let o = run(&[
        "simulate",
        &net("single_pipe"),
        &net("single_pipe_controls"),
        "--format",
        "csv",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert_eq!(out.lines().next(), Some("kind,id,pressure,gamma,flow"));
    assert!(out.contains("junction,J1,5.0000000000000000e6,"));
    assert!(out.contains("pipe,P1,"));
}

fn expect_record(o: &Output, golden_name: &str) {
    assert_eq!(o.status.code(), Some(1));
    assert!(o.stdout.is_empty());
    assert_eq!(stderr(o), golden(golden_name));
}

#[test]
fn missing_file_reports_the_path() {
    let o = run(&["solve", "no/such/network"]);
    assert_eq!(o.status.code(), Some(1));
    let v: serde_json::Value = serde_json::from_str(stderr(&o).trim()).unwrap();
    assert_eq!(v["code"], "io");
    assert_eq!(v["element"], "no/such/network");
}

#[test]
fn invalid_network_record() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(networks().join("single_pipe.toml"))
        .unwrap()
        .replace("to = \"J3\"", "to = \"J9\"");
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, text).unwrap();
    expect_record(&run(&["validate", path.to_str().unwrap()]), "unknown_junction.json");
}

#[test]
fn low_boost_record() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("controls.toml");
    std::fs::write(&path, "[supply_ng]\nS1 = 1.0\n[demand]\nD1 = 1.0\n[alpha]\nC1 = 0.5\n").unwrap();
    let o = run(&["simulate", &net("single_pipe"), path.to_str().unwrap()]);
    expect_record(&o, "low_boost.json");
}

#[test]
fn overdrawn_pipe_record() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("controls.toml");
    std::fs::write(&path, "[supply_ng]\nS1 = 60.0\n[demand]\nD1 = 60.0\n").unwrap();
    let o = run(&["simulate", &net("single_pipe"), path.to_str().unwrap()]);
    expect_record(&o, "overdrawn_pipe.json");
}

#[test]
fn unknown_sweep_gnode_record() {
    let o = run(&["sweep", &net("single_pipe"), "--target", "demand_max:D9", "--range", "100:110:5"]);
    expect_record(&o, "unknown_sweep_gnode.json");
}
