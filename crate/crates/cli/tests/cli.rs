use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cqbound"))
}

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn write_model(dir: &tempfile::TempDir, body: &str) -> PathBuf {
    let p = dir.path().join("m.json");
    std::fs::write(&p, body).unwrap();
    p
}

fn rows(out: &Output) -> Vec<(String, String, String, String)> {
    String::from_utf8_lossy(&out.stdout)
        .lines()
        .take_while(|l| !l.is_empty())
        .map(|l| {
            let f: Vec<&str> = l.split('\t').collect();
            assert_eq!(f.len(), 4, "row {l:?}");
            (f[0].into(), f[1].into(), f[2].into(), f[3].into())
        })
        .collect()
}

fn value(out: &Output, name: &str) -> f64 {
    rows(out).into_iter().find(|r| r.0 == name).unwrap_or_else(|| panic!("no row {name}")).1.parse().unwrap()
}

const VALID: &str = r#"{"schema_version":1,"alphabet":["0","1"],"q_x":[0.5,0.5],
  "states":[[[[1,0],[0,0]],[[0,0],[0,0]]],[[[0.5,0],[0,0]],[[0,0],[0.5,0]]]]}"#;

#[test]
fn entropy_rows_carry_units_and_flags() {
    let out = run(&["entropy", "--model", data("binary_qubit.json").to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r = rows(&out);
    assert!(r.iter().any(|x| x.0 == "I_XY" && x.2 == "nats" && x.3 == "bits=false"));
    let bits = run(&["entropy", "--bits", "--model", data("binary_qubit.json").to_str().unwrap()]);
    let (n, b) = (value(&out, "H_X"), value(&bits, "H_X"));
    assert!((n - 2f64.ln()).abs() < 1e-12);
    assert!((b - 1.0).abs() < 1e-12);
}

#[test]
fn q_x_not_normalized_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let m = write_model(&dir, &VALID.replace("[0.5,0.5]", "[0.49,0.5]"));
    let out = run(&["entropy", "--model", m.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("q_x"));
}

#[test]
fn non_hermitian_state_names_the_entry() {
    let dir = tempfile::tempdir().unwrap();
    let m = write_model(&dir, &VALID.replace("[[[0.5,0],[0,0]]", "[[[0.5,0],[0.1,0]]"));
    let out = run(&["entropy", "--model", m.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("states[1][0][1]") && err.contains("Hermitian"), "{err}");
}

#[test]
fn unsupported_schema_version() {
    let dir = tempfile::tempdir().unwrap();
    let m = write_model(&dir, &VALID.replace("\"schema_version\":1", "\"schema_version\":7"));
    let out = run(&["entropy", "--model", m.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("schema_version"));
}

#[test]
fn sc_bound_below_threshold_exits_3() {
    let out = run(&["sc-bound", "--model", data("binary_qubit.json").to_str().unwrap(), "--r", "0.3", "--eps", "0.5", "--n", "5"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn sc_bound_above_threshold_reports_orders() {
    let out = run(&["sc-bound", "--model", data("binary_qubit.json").to_str().unwrap(), "--r", "0.3", "--eps", "0.5", "--n", "100"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let total = value(&out, "sc_bound_stein.total");
    let parts: f64 = ["first_order", "second_order", "third_order"].iter().map(|p| value(&out, &format!("sc_bound_stein.{p}"))).sum();
    assert!((total - parts).abs() < 1e-12);
    assert!(value(&out, "sc_bound_stein.first_order") >= 0.0);
}

#[test]
fn beta_over_the_dimension_cap_exits_4() {
    let out = run(&["beta", "--model", data("binary_qubit.json").to_str().unwrap(), "--eps", "0.1", "--n", "6"]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn verify_rhc_emits_margins_table() {
    let out = run(&["verify", "--suite", "rhc", "--seed", "7", "--instances", "20"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    let table: Vec<&str> = text.lines().skip_while(|l| !l.is_empty()).skip(1).collect();
    assert_eq!(table[0], "instance_id,seed,suite,check,params,lhs,rhs,margin");
    assert_eq!(table.len(), 1 + 20 * 5);
}

#[test]
fn verify_unknown_suite_is_rejected() {
    let out = run(&["verify", "--suite", "nope", "--seed", "1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn verify_requires_a_seed() {
    let out = run(&["verify", "--suite", "rhc"]);
    assert!(!out.status.success());
}

#[test]
fn bad_thread_count_is_rejected() {
    let out = bin().env("CQBOUND_THREADS", "many").args(["verify", "--suite", "np", "--seed", "1", "--instances", "2"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn sweep_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("sweep.csv");
    let out = run(&[
        "sweep", "--model", data("binary_qubit.json").to_str().unwrap(), "--r", "0.0", "--eps", "0.5", "--n-max", "2", "--csv",
        csv.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = std::fs::read_to_string(csv).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines.len(), 3);
    for l in &lines[1..] {
        let margin: f64 = l.rsplit(',').next().unwrap().parse().unwrap();
        assert!(margin >= 0.0, "{l}");
    }
}
