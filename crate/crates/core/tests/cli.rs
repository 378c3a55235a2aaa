use std::path::Path;
use std::process::{Command, Output};

use qcontext::qasm::parse_qasm;

fn qcontext(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qcontext")).args(args).output().unwrap()
}

fn bench(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("benchmarks").join(name).to_string_lossy().into_owned()
}

#[test]
fn compile_writes_report_and_circuits() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("r.json");
    let native = dir.path().join("n.qasm");
    let basis = dir.path().join("b.qasm");
    let out = qcontext(&[
        "compile",
        "--input",
        &bench("sandwich.qasm"),
        "--coupling",
        "line-3",
        "--mode",
        "trios",
        "--verify",
        "--report",
        report.to_str().unwrap(),
        "--emit",
        native.to_str().unwrap(),
        "--emit-basis",
        basis.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("verified"));

    let r: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(r["mode"], "trios");
    assert_eq!(r["nq"], 3);
    assert!(r["verify_distance"].as_f64().unwrap() < 1e-7);
    assert!(r.get("time_ms").is_none());

    let n = parse_qasm(&std::fs::read_to_string(&native).unwrap()).unwrap();
    assert_eq!(n.count(qcontext::GateKind::Rzx) as u64, r["cr_r"].as_u64().unwrap() + r["cr_b"].as_u64().unwrap());
    let b = parse_qasm(&std::fs::read_to_string(&basis).unwrap()).unwrap();
    assert_eq!(b.cnot_cost() as u64, r["basis_cx"].as_u64().unwrap());
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(qcontext(&[]).status.code(), Some(1));
    assert_eq!(qcontext(&["compile", "--coupling", "line-3"]).status.code(), Some(1));
    assert_eq!(qcontext(&["compile", "--input", "x.qasm", "--coupling", "line-3", "--mode", "fastest"]).status.code(), Some(1));
    let empty = tempfile::tempdir().unwrap();
    let out = qcontext(&["bench", "--coupling", "line-3", "--suite", empty.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(qcontext(&["--help"]).status.code(), Some(0));
}

#[test]
fn compile_errors_exit_two() {
    let missing = qcontext(&["compile", "--input", "/nonexistent.qasm", "--coupling", "line-3"]);
    assert_eq!(missing.status.code(), Some(2));
    let too_small = qcontext(&["compile", "--input", &bench("cnx5.qasm"), "--coupling", "line-3"]);
    assert_eq!(too_small.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&too_small.stderr).contains("error"));
    let bad_map = qcontext(&["compile", "--input", &bench("sandwich.qasm"), "--coupling", "hexagon"]);
    assert_eq!(bad_map.status.code(), Some(2));
}

#[test]
fn bench_prints_table_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("bench.json");
    let out = qcontext(&[
        "bench",
        "--coupling",
        "ring-6",
        "--report",
        report.to_str().unwrap(),
        &bench("sandwich.qasm"),
        &bench("qaoa_ring6.qasm"),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = String::from_utf8_lossy(&out.stdout);
    assert!(table.contains("geomean"));
    assert!(table.contains("---"), "a Toffoli-free row has no CR_b delta");
    let r: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    let rows = r["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0]["benchmark"], "qaoa_ring6");
    assert!(rows[0]["delta_cr_b"].is_null());
}

#[test]
fn library_dump_parses() {
    for kind in ["basis", "native"] {
        let out = qcontext(&["library", "--kind", kind]);
        assert!(out.status.success());
        let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
        assert!(v["variants"].as_array().unwrap().len() >= 14);
    }
}
