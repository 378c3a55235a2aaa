//! C interface to the qcontext compiler.
//!
//! Objects cross the boundary as opaque handles created by `qc_*_new`-style
//! constructors and released by the matching `*_free`. Every fallible call
//! returns a [`QcStatus`]; on failure [`qc_last_error`] describes what went
//! wrong on the calling thread. Strings returned through `char **` belong to
//! the caller and are released with [`qc_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use qcontext::pipeline::{compile_pipeline, Compiled, Libraries, Mode, PipelineConfig};
use qcontext::qasm::{emit_qasm, parse_qasm};
use qcontext::topology::CouplingMap;
use qcontext::{Circuit, Error};

/// Result of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    Coupling = 4,
    Compile = 5,
    Verification = 6,
    InvalidArgument = 7,
    Io = 8,
    /// Internal panic caught at the boundary.
    Panic = 9,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QcMode {
    Qcontext = 0,
    Trios = 1,
}

/// Counts for one compiled circuit.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct QcMetrics {
    pub cr_routing: usize,
    pub cr_program: usize,
    pub sx: usize,
    pub basis_cx: usize,
    pub num_swaps: usize,
}

/// Opaque circuit handle.
pub struct QcCircuit(Circuit);

/// Opaque coupling map handle.
pub struct QcCouplingMap(CouplingMap);

/// Opaque compilation result.
pub struct QcCompileResult(Compiled);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> QcStatus {
    match e {
        Error::Parse { .. } => QcStatus::Parse,
        Error::Coupling(_) => QcStatus::Coupling,
        Error::Verification(_) => QcStatus::Verification,
        Error::Io(_) => QcStatus::Io,
        _ => QcStatus::Compile,
    }
}

struct Fail(QcStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Fail {
        Fail(status_of(&e), e.to_string())
    }
}

fn null() -> Fail {
    Fail(QcStatus::NullPointer, "null pointer argument".into())
}

/// Run `f`, translating errors and panics into a status.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> QcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => QcStatus::Ok,
        Ok(Err(Fail(s, msg))) => {
            set_error(&msg);
            s
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(&format!("internal panic: {msg}"));
            QcStatus::Panic
        }
    }
}

unsafe fn read_str<'a>(s: *const c_char) -> Result<&'a str, Fail> {
    if s.is_null() {
        return Err(null());
    }
    CStr::from_ptr(s).to_str().map_err(|_| Fail(QcStatus::InvalidUtf8, "string is not valid UTF-8".into()))
}

unsafe fn put<T>(out: *mut *mut T, v: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null());
    }
    *out = Box::into_raw(Box::new(v));
    Ok(())
}

unsafe fn put_string(out: *mut *mut c_char, s: String) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null());
    }
    let c = CString::new(s).map_err(|_| Fail(QcStatus::InvalidArgument, "string contains NUL".into()))?;
    *out = c.into_raw();
    Ok(())
}

unsafe fn get<'a, T>(p: *const T) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(null)
}

/// Message for the last failed call on this thread, or NULL. Valid until
/// the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn qc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn qc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `s` must be NULL or a string returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn qc_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parse OpenQASM 2 text.
///
/// # Safety
/// `qasm` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qc_circuit_from_qasm(qasm: *const c_char, out: *mut *mut QcCircuit) -> QcStatus {
    guard(|| {
        let c = parse_qasm(read_str(qasm)?)?;
        put(out, QcCircuit(c))
    })
}

/// # Safety
/// `c` must be a live circuit handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qc_circuit_num_qubits(c: *const QcCircuit, out: *mut usize) -> QcStatus {
    guard(|| {
        let n = get(c)?.0.num_qubits;
        *out.as_mut().ok_or_else(null)? = n;
        Ok(())
    })
}

/// # Safety
/// `c` must be a live circuit handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qc_circuit_num_gates(c: *const QcCircuit, out: *mut usize) -> QcStatus {
    guard(|| {
        let n = get(c)?.0.len();
        *out.as_mut().ok_or_else(null)? = n;
        Ok(())
    })
}

/// Emit the circuit as OpenQASM 2; free the result with [`qc_string_free`].
///
/// # Safety
/// `c` must be a live circuit handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qc_circuit_to_qasm(c: *const QcCircuit, out: *mut *mut c_char) -> QcStatus {
    guard(|| put_string(out, emit_qasm(&get(c)?.0)?))
}

/// # Safety
/// `c` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn qc_circuit_free(c: *mut QcCircuit) {
    if !c.is_null() {
        drop(Box::from_raw(c));
    }
}

/// Builtin name (`line-N`, `ring-N`, `full-N`, `heavy-hex-27`) or JSON file path.
///
/// # Safety
/// `source` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qc_coupling_load(source: *const c_char, out: *mut *mut QcCouplingMap) -> QcStatus {
    guard(|| put(out, QcCouplingMap(CouplingMap::load(read_str(source)?)?)))
}

/// Coupling map from its JSON text.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qc_coupling_from_json(json: *const c_char, out: *mut *mut QcCouplingMap) -> QcStatus {
    guard(|| {
        let m = CouplingMap::from_json(read_str(json)?).map_err(|e| Fail(QcStatus::Coupling, e.to_string()))?;
        put(out, QcCouplingMap(m))
    })
}

/// # Safety
/// `m` must be a live coupling handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qc_coupling_num_qubits(m: *const QcCouplingMap, out: *mut usize) -> QcStatus {
    guard(|| {
        let n = get(m)?.0.num_physical();
        *out.as_mut().ok_or_else(null)? = n;
        Ok(())
    })
}

/// # Safety
/// `m` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn qc_coupling_free(m: *mut QcCouplingMap) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Compile `c` for `map`. With `verify`, a lowered circuit that is not
/// equivalent to the input yields [`QcStatus::Verification`].
///
/// # Safety
/// `c` and `map` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qc_compile(
    c: *const QcCircuit,
    map: *const QcCouplingMap,
    mode: QcMode,
    seed: u64,
    verify: bool,
    out: *mut *mut QcCompileResult,
) -> QcStatus {
    guard(|| {
        let (c, map) = (get(c)?, get(map)?);
        if out.is_null() {
            return Err(null());
        }
        let mode = match mode {
            QcMode::Qcontext => Mode::Qcontext,
            QcMode::Trios => Mode::Trios,
        };
        let cfg = PipelineConfig { mode, seed, verify, ..PipelineConfig::default() };
        let r = compile_pipeline(&c.0, &map.0, &cfg, Libraries::shared()?)?;
        put(out, QcCompileResult(r))
    })
}

/// # Safety
/// `r` must be a live result handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qc_result_metrics(r: *const QcCompileResult, out: *mut QcMetrics) -> QcStatus {
    guard(|| {
        let r = &get(r)?.0;
        let m = &r.metrics;
        *out.as_mut().ok_or_else(null)? =
            QcMetrics { cr_routing: m.cr_r, cr_program: m.cr_b, sx: m.sx, basis_cx: m.basis_cx, num_swaps: r.routed.num_swaps };
        Ok(())
    })
}

/// Phase distance measured by a verified compile; [`QcStatus::InvalidArgument`]
/// if verification did not run.
///
/// # Safety
/// `r` must be a live result handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qc_result_verify_distance(r: *const QcCompileResult, out: *mut f64) -> QcStatus {
    guard(|| {
        let d = get(r)?.0.verify_distance.ok_or_else(|| Fail(QcStatus::InvalidArgument, "verification did not run".into()))?;
        *out.as_mut().ok_or_else(null)? = d;
        Ok(())
    })
}

/// Native (rzx/rz/sx) circuit as OpenQASM 2.
///
/// # Safety
/// `r` must be a live result handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qc_result_native_qasm(r: *const QcCompileResult, out: *mut *mut c_char) -> QcStatus {
    guard(|| put_string(out, emit_qasm(&get(r)?.0.native)?))
}

/// CNOT-level circuit as OpenQASM 2.
///
/// # Safety
/// `r` must be a live result handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qc_result_basis_qasm(r: *const QcCompileResult, out: *mut *mut c_char) -> QcStatus {
    guard(|| put_string(out, emit_qasm(&get(r)?.0.basis)?))
}

/// Final placement: `out[v]` is the physical qubit holding virtual qubit `v`.
/// Writes at most `len` entries and stores the full length in `*written`.
///
/// # Safety
/// `r` must be a live result handle; `out` must hold `len` entries (or be
/// NULL when `len` is 0); `written` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qc_result_final_layout(r: *const QcCompileResult, out: *mut usize, len: usize, written: *mut usize) -> QcStatus {
    guard(|| {
        let lay = &get(r)?.0.routed.final_layout;
        if len > 0 {
            if out.is_null() {
                return Err(null());
            }
            let n = len.min(lay.len());
            ptr::copy_nonoverlapping(lay.as_ptr(), out, n);
        }
        *written.as_mut().ok_or_else(null)? = lay.len();
        Ok(())
    })
}

/// # Safety
/// `r` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn qc_result_free(r: *mut QcCompileResult) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}
