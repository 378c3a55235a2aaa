#ifndef QCONTEXT_H
#define QCONTEXT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum QcStatus {
  QC_STATUS_OK = 0,
  QC_STATUS_NULL_POINTER = 1,
  QC_STATUS_INVALID_UTF8 = 2,
  QC_STATUS_PARSE = 3,
  QC_STATUS_COUPLING = 4,
  QC_STATUS_COMPILE = 5,
  QC_STATUS_VERIFICATION = 6,
  QC_STATUS_INVALID_ARGUMENT = 7,
  QC_STATUS_IO = 8,
  /**
   * Internal panic caught at the boundary.
   */
  QC_STATUS_PANIC = 9,
} QcStatus;

typedef enum QcMode {
  QC_MODE_QCONTEXT = 0,
  QC_MODE_TRIOS = 1,
} QcMode;

/**
 * Opaque circuit handle.
 */
typedef struct QcCircuit QcCircuit;

/**
 * Opaque compilation result.
 */
typedef struct QcCompileResult QcCompileResult;

/**
 * Opaque coupling map handle.
 */
typedef struct QcCouplingMap QcCouplingMap;

/**
 * Counts for one compiled circuit.
 */
typedef struct QcMetrics {
  size_t cr_routing;
  size_t cr_program;
  size_t sx;
  size_t basis_cx;
  size_t num_swaps;
} QcMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or NULL. Valid until
 * the next failing call on the same thread.
 */
const char *qc_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *qc_version(void);

/**
 * # Safety
 * `s` must be NULL or a string returned by this library and not yet freed.
 */
void qc_string_free(char *s);

/**
 * Parse OpenQASM 2 text.
 *
 * # Safety
 * `qasm` must be a NUL-terminated string; `out` must be writable.
 */
enum QcStatus qc_circuit_from_qasm(const char *qasm, struct QcCircuit **out);

/**
 * # Safety
 * `c` must be a live circuit handle; `out` must be writable.
 */
enum QcStatus qc_circuit_num_qubits(const struct QcCircuit *c, size_t *out);

/**
 * # Safety
 * `c` must be a live circuit handle; `out` must be writable.
 */
enum QcStatus qc_circuit_num_gates(const struct QcCircuit *c, size_t *out);

/**
 * Emit the circuit as OpenQASM 2; free the result with [`qc_string_free`].
 *
 * # Safety
 * `c` must be a live circuit handle; `out` must be writable.
 */
enum QcStatus qc_circuit_to_qasm(const struct QcCircuit *c, char **out);

/**
 * # Safety
 * `c` must be NULL or a handle not yet freed.
 */
void qc_circuit_free(struct QcCircuit *c);

/**
 * Builtin name (`line-N`, `ring-N`, `full-N`, `heavy-hex-27`) or JSON file path.
 *
 * # Safety
 * `source` must be a NUL-terminated string; `out` must be writable.
 */
enum QcStatus qc_coupling_load(const char *source, struct QcCouplingMap **out);

/**
 * Coupling map from its JSON text.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
enum QcStatus qc_coupling_from_json(const char *json, struct QcCouplingMap **out);

/**
 * # Safety
 * `m` must be a live coupling handle; `out` must be writable.
 */
enum QcStatus qc_coupling_num_qubits(const struct QcCouplingMap *m, size_t *out);

/**
 * # Safety
 * `m` must be NULL or a handle not yet freed.
 */
void qc_coupling_free(struct QcCouplingMap *m);

/**
 * Compile `c` for `map`. With `verify`, a lowered circuit that is not
 * equivalent to the input yields [`QcStatus::Verification`].
 *
 * # Safety
 * `c` and `map` must be live handles; `out` must be writable.
 */
enum QcStatus qc_compile(const struct QcCircuit *c,
                         const struct QcCouplingMap *map,
                         enum QcMode mode,
                         uint64_t seed,
                         bool verify,
                         struct QcCompileResult **out);

/**
 * # Safety
 * `r` must be a live result handle; `out` must be writable.
 */
enum QcStatus qc_result_metrics(const struct QcCompileResult *r, struct QcMetrics *out);

/**
 * Phase distance measured by a verified compile; [`QcStatus::InvalidArgument`]
 * if verification did not run.
 *
 * # Safety
 * `r` must be a live result handle; `out` must be writable.
 */
enum QcStatus qc_result_verify_distance(const struct QcCompileResult *r, double *out);

/**
 * Native (rzx/rz/sx) circuit as OpenQASM 2.
 *
 * # Safety
 * `r` must be a live result handle; `out` must be writable.
 */
enum QcStatus qc_result_native_qasm(const struct QcCompileResult *r, char **out);

/**
 * CNOT-level circuit as OpenQASM 2.
 *
 * # Safety
 * `r` must be a live result handle; `out` must be writable.
 */
enum QcStatus qc_result_basis_qasm(const struct QcCompileResult *r, char **out);

/**
 * Final placement: `out[v]` is the physical qubit holding virtual qubit `v`.
 * Writes at most `len` entries and stores the full length in `*written`.
 *
 * # Safety
 * `r` must be a live result handle; `out` must hold `len` entries (or be
 * NULL when `len` is 0); `written` must be writable.
 */
enum QcStatus qc_result_final_layout(const struct QcCompileResult *r,
                                     size_t *out,
                                     size_t len,
                                     size_t *written);

/**
 * # Safety
 * `r` must be NULL or a handle not yet freed.
 */
void qc_result_free(struct QcCompileResult *r);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QCONTEXT_H */
