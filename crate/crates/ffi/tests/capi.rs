use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use qcontext_ffi::*;

const SANDWICH: &str = "OPENQASM 2.0;\ninclude \"qelib1.inc\";\nqreg q[3];\ncx q[0],q[1];\nccx q[0],q[1],q[2];\nswap q[1],q[2];\n";

fn last_error() -> String {
    let p = qc_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

unsafe fn circuit(text: &str) -> *mut QcCircuit {
    let src = CString::new(text).unwrap();
    let mut c = ptr::null_mut();
    assert_eq!(qc_circuit_from_qasm(src.as_ptr(), &mut c), QcStatus::Ok);
    c
}

unsafe fn coupling(name: &str) -> *mut QcCouplingMap {
    let s = CString::new(name).unwrap();
    let mut m = ptr::null_mut();
    assert_eq!(qc_coupling_load(s.as_ptr(), &mut m), QcStatus::Ok);
    m
}

#[test]
fn compile_round_trip() {
    unsafe {
        let c = circuit(SANDWICH);
        let mut n = 0;
        assert_eq!(qc_circuit_num_qubits(c, &mut n), QcStatus::Ok);
        assert_eq!(n, 3);
        assert_eq!(qc_circuit_num_gates(c, &mut n), QcStatus::Ok);
        assert_eq!(n, 3);
        let m = coupling("full-3");

        let mut metrics = [QcMetrics::default(); 2];
        for (i, mode) in [QcMode::Trios, QcMode::Qcontext].into_iter().enumerate() {
            let mut r = ptr::null_mut();
            assert_eq!(qc_compile(c, m, mode, 7, true, &mut r), QcStatus::Ok, "{}", last_error());
            assert_eq!(qc_result_metrics(r, &mut metrics[i]), QcStatus::Ok);
            let mut d = f64::NAN;
            assert_eq!(qc_result_verify_distance(r, &mut d), QcStatus::Ok);
            assert!(d < 1e-7);

            let mut s = ptr::null_mut();
            assert_eq!(qc_result_native_qasm(r, &mut s), QcStatus::Ok);
            let text = CStr::from_ptr(s).to_str().unwrap().to_owned();
            qc_string_free(s);
            assert!(text.contains("rzx("));
            // The emitted native circuit parses back.
            let back = circuit(&text);
            qc_circuit_free(back);

            let mut lay = [usize::MAX; 8];
            let mut len = 0;
            assert_eq!(qc_result_final_layout(r, lay.as_mut_ptr(), lay.len(), &mut len), QcStatus::Ok);
            assert_eq!(len, 3);
            let mut sorted = lay[..3].to_vec();
            sorted.sort();
            assert_eq!(sorted, [0, 1, 2]);
            qc_result_free(r);
        }
        assert!(metrics[1].cr_program <= metrics[0].cr_program);
        assert!(metrics[1].sx <= metrics[0].sx);
        assert_eq!(metrics[0].basis_cx, 10);

        qc_coupling_free(m);
        qc_circuit_free(c);
    }
}

#[test]
fn errors_carry_status_and_message() {
    unsafe {
        let bad = CString::new("OPENQASM 2.0;\nqreg q[2];\nfoo q[0];\n").unwrap();
        let mut c = ptr::null_mut();
        assert_eq!(qc_circuit_from_qasm(bad.as_ptr(), &mut c), QcStatus::Parse);
        assert!(c.is_null());
        assert!(last_error().contains("line 3"), "{}", last_error());

        assert_eq!(qc_circuit_from_qasm(ptr::null(), &mut c), QcStatus::NullPointer);

        let name = CString::new("ring-2").unwrap();
        let mut m = ptr::null_mut();
        assert_ne!(qc_coupling_load(name.as_ptr(), &mut m), QcStatus::Ok);
        assert!(m.is_null());

        let json = CString::new(r#"{"n": 3, "edges": [[0, 1]]}"#).unwrap();
        assert_eq!(qc_coupling_from_json(json.as_ptr(), &mut m), QcStatus::Coupling);
        assert!(last_error().contains("not connected"));

        // Too wide for the device.
        let c = circuit("OPENQASM 2.0;\nqreg q[4];\ncx q[0],q[3];\n");
        let m = coupling("line-3");
        let mut r = ptr::null_mut();
        assert_eq!(qc_compile(c, m, QcMode::Qcontext, 0, false, &mut r), QcStatus::Compile);
        assert!(r.is_null());
        assert_eq!(qc_compile(c, ptr::null(), QcMode::Qcontext, 0, false, &mut r), QcStatus::NullPointer);
        qc_coupling_free(m);
        qc_circuit_free(c);

        let invalid_utf8 = [0xffu8, 0xfe, 0];
        let mut c = ptr::null_mut();
        assert_eq!(qc_circuit_from_qasm(invalid_utf8.as_ptr().cast(), &mut c), QcStatus::InvalidUtf8);
    }
}

#[test]
fn verify_distance_requires_verification() {
    unsafe {
        let c = circuit(SANDWICH);
        let m = coupling("line-3");
        let mut r = ptr::null_mut();
        assert_eq!(qc_compile(c, m, QcMode::Qcontext, 0, false, &mut r), QcStatus::Ok);
        let mut d = 0.0;
        assert_eq!(qc_result_verify_distance(r, &mut d), QcStatus::InvalidArgument);
        let mut mt = QcMetrics::default();
        qc_result_metrics(r, &mut mt);
        assert!(mt.cr_program > 0);
        qc_result_free(r);
        qc_coupling_free(m);
        qc_circuit_free(c);
        qc_string_free(ptr::null_mut());
        qc_result_free(ptr::null_mut());
    }
}

#[test]
fn version_is_set() {
    let v = unsafe { CStr::from_ptr(qc_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_is_valid_c() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/qcontext.h");
    let text = std::fs::read_to_string(&header).expect("header generated by build.rs");
    for sym in ["qc_compile", "qc_last_error", "qc_string_free", "QcCompileResult", "QC_STATUS_VERIFICATION"] {
        assert!(text.contains(sym), "{sym} missing from header");
    }
    let Ok(out) = Command::new("cc").args(["-fsyntax-only", "-x", "c", "-std=c99"]).arg(&header).output() else {
        eprintln!("no C compiler; syntax check skipped");
        return;
    };
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
