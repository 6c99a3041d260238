use std::process::{Command, Output};

use serde_json::Value;

fn horizon_check(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_horizon-check")).args(args).output().expect("spawn horizon-check")
}

fn stdout(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn csv_rows(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("horizon_check_report_v1,"));
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    (header, lines.map(|l| l.split(',').map(String::from).collect()).collect())
}

#[test]
fn list_examples_names_all_three() {
    let text = stdout(&horizon_check(&["list-examples"]));
    for name in ["ramsey", "integrator", "oscillator"] {
        assert!(text.lines().any(|l| l.starts_with(&format!("{name},"))), "{name} missing");
    }
    assert!(!text.contains('\r'));
}

#[test]
fn unknown_example_is_a_usage_error() {
    let out = horizon_check(&["check", "--example", "pendulum"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn invalid_parameter_is_an_operational_failure() {
    let out = horizon_check(&["check", "--example", "oscillator", "--b", "-1"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}

#[test]
fn failing_verdicts_still_exit_zero() {
    let out = horizon_check(&["check", "--example", "oscillator", "--b", "0.5", "--t-max", "200"]);
    let text = stdout(&out);
    assert!(text.contains(",fails,"));
}

#[test]
fn single_cell_phase_diagram_finds_the_saddle() {
    let text = stdout(&horizon_check(&[
        "phase-diagram",
        "--example",
        "ramsey",
        "--grid",
        "1",
        "--k-max",
        "32",
        "--c-max",
        "2.4",
    ]));
    let (header, rows) = csv_rows(&text);
    let class = header.iter().position(|h| h == "class").unwrap();
    let grid: Vec<_> = rows.iter().filter(|r| r[0] == "grid").collect();
    assert_eq!(grid.len(), 1);
    assert_eq!(grid[0][class], "saddle");
    let k = header.iter().position(|h| h == "k").unwrap();
    let c = header.iter().position(|h| h == "c").unwrap();
    let at_star = rows.iter().find(|r| r[0] == "k_nullcline" && r[k] == "32").expect("nullcline through k*");
    assert_eq!(at_star[c], "2.4");
}

#[test]
fn repeated_runs_are_byte_identical() {
    let args = ["phase-diagram", "--grid", "12"];
    assert_eq!(stdout(&horizon_check(&args)), stdout(&horizon_check(&args)));
    let args = ["overtake", "--example", "oscillator", "--t-max", "100"];
    assert_eq!(stdout(&horizon_check(&args)), stdout(&horizon_check(&args)));
}

#[test]
fn json_mirrors_csv() {
    let args = ["needle", "--example", "integrator", "--grid", "6"];
    let csv = stdout(&horizon_check(&args));
    let mut json_args = args.to_vec();
    json_args.extend(["--format", "json"]);
    let json: Value = serde_json::from_str(&stdout(&horizon_check(&json_args))).unwrap();
    assert_eq!(json["schema"], "horizon_check_report_v1");
    assert_eq!(json["command"], "needle");
    let (header, rows) = csv_rows(&csv);
    let columns: Vec<String> =
        json["columns"].as_array().unwrap().iter().map(|c| c.as_str().unwrap().to_string()).collect();
    assert_eq!(columns, header);
    let json_rows = json["rows"].as_array().unwrap();
    assert_eq!(json_rows.len(), rows.len());
    for (row, obj) in rows.iter().zip(json_rows) {
        for (name, cell) in header.iter().zip(row) {
            let v = &obj[name];
            match v {
                Value::Null => assert!(cell.is_empty()),
                Value::String(s) => assert_eq!(s, cell),
                Value::Number(n) => assert_eq!(n.as_f64().unwrap(), cell.parse::<f64>().unwrap()),
                Value::Bool(b) => assert_eq!(b.to_string(), *cell),
                other => panic!("unexpected {other}"),
            }
        }
    }
}

#[test]
fn out_flag_writes_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("examples.json");
    let out = horizon_check(&["list-examples", "--format", "json", "--out", path.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v["command"], "list-examples");
}

#[test]
fn unwritable_output_is_an_operational_failure() {
    let out = horizon_check(&["list-examples", "--out", "/nonexistent-dir/report.csv"]);
    assert_eq!(out.status.code(), Some(1));
}
