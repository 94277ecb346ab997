#ifndef QIPSOLVE_H
#define QIPSOLVE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum QipStatus {
  QIP_STATUS_OK = 0,
  QIP_STATUS_NULL_POINTER = 1,
  QIP_STATUS_INVALID_ARGUMENT = 2,
  QIP_STATUS_IO = 3,
  QIP_STATUS_PARSE = 4,
  QIP_STATUS_VALIDATION = 5,
  QIP_STATUS_INFEASIBLE_START = 6,
  QIP_STATUS_NOT_FOUND = 7,
  QIP_STATUS_NUMERICAL = 8,
  QIP_STATUS_ITER_CAP = 9,
  QIP_STATUS_BUFFER_TOO_SMALL = 10,
  QIP_STATUS_PANIC = 11,
} QipStatus;

typedef enum QipProblemKind {
  QIP_PROBLEM_KIND_TYPE1 = 1,
  QIP_PROBLEM_KIND_TYPE2 = 2,
  QIP_PROBLEM_KIND_QKD = 3,
} QipProblemKind;

typedef enum QipTermination {
  QIP_TERMINATION_CONVERGED = 0,
  QIP_TERMINATION_ITER_CAP = 1,
  QIP_TERMINATION_NUMERICAL_FAILURE = 2,
} QipTermination;

/**
 * Opaque problem handle.
 */
typedef struct QipProblem QipProblem;

/**
 * Opaque solve report handle.
 */
typedef struct QipReport QipReport;

/**
 * Problem dimensions; zero fields take the generator defaults.
 */
typedef struct QipDims {
  size_t n;
  size_t k;
  size_t m;
  size_t big_n;
  size_t r1;
  size_t r2;
} QipDims;

/**
 * Solver settings. Obtain defaults from [`qip_config_default`].
 */
typedef struct QipSolverConfig {
  double beta0;
  double theta;
  double epsilon;
  double kappa;
  size_t max_outer;
  size_t max_inner;
  /**
   * Final polish tolerance on the decrement; zero disables polishing.
   */
  double polish_tol;
  /**
   * Drops the log-det barrier of a QKD problem (heuristic mode).
   */
  bool no_barrier;
} QipSolverConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Loads and validates a problem file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a writable pointer.
 */
enum QipStatus qip_problem_load(const char *path, struct QipProblem **out);

/**
 * Builds a canonical instance such as `trace-inverse-n4` or `qkd-toy`.
 *
 * # Safety
 * `name` must be a NUL-terminated string and `out` a writable pointer.
 */
enum QipStatus qip_problem_named(const char *name, struct QipProblem **out);

/**
 * Generates a seeded random instance.
 *
 * # Safety
 * `out` must be a writable pointer.
 */
enum QipStatus qip_problem_generate(enum QipProblemKind kind,
                                    struct QipDims dims,
                                    uint64_t seed,
                                    struct QipProblem **out);

/**
 * Writes a problem file.
 *
 * # Safety
 * `problem` must be a live handle and `path` a NUL-terminated string.
 */
enum QipStatus qip_problem_save(const struct QipProblem *problem, const char *path);

/**
 * Order `n` of the matrix variable, 0 for a null handle.
 *
 * # Safety
 * `problem` must be null or a live handle.
 */
size_t qip_problem_order(const struct QipProblem *problem);

/**
 * # Safety
 * `problem` must be null or a handle not yet freed.
 */
void qip_problem_free(struct QipProblem *problem);

struct QipSolverConfig qip_config_default(void);

/**
 * Solves from the problem's declared start. `config` may be null for the
 * defaults. A report is produced (and `QIP_STATUS_OK` returned) whenever
 * the run starts; whether it converged is read from the report.
 *
 * # Safety
 * `problem` must be a live handle, `config` null or valid, `out` writable.
 */
enum QipStatus qip_solve(const struct QipProblem *problem,
                         const struct QipSolverConfig *config,
                         struct QipReport **out);

/**
 * # Safety
 * `report` must be null or a live handle.
 */
enum QipTermination qip_report_termination(const struct QipReport *report);

/**
 * Objective at the returned point, NaN for a null handle.
 *
 * # Safety
 * `report` must be null or a live handle.
 */
double qip_report_f_min(const struct QipReport *report);

/**
 * # Safety
 * `report` must be null or a live handle.
 */
double qip_report_final_beta(const struct QipReport *report);

/**
 * # Safety
 * `report` must be null or a live handle.
 */
double qip_report_final_delta(const struct QipReport *report);

/**
 * # Safety
 * `report` must be null or a live handle.
 */
size_t qip_report_total_newton(const struct QipReport *report);

/**
 * # Safety
 * `report` must be null or a live handle.
 */
size_t qip_report_outer_iters(const struct QipReport *report);

/**
 * Copies the `n×n` solution, row-major, into `buf` of length `len`.
 * On `QIP_STATUS_BUFFER_TOO_SMALL` the needed length is in `needed`.
 *
 * # Safety
 * `report` must be a live handle, `buf` valid for `len` writes (or null
 * when `len` is 0), `needed` null or writable.
 */
enum QipStatus qip_report_x_star(const struct QipReport *report,
                                 double *buf,
                                 size_t len,
                                 size_t *needed);

/**
 * Report as JSON; release with [`qip_string_free`]. Null on failure.
 *
 * # Safety
 * `report` must be null or a live handle.
 */
char *qip_report_to_json(const struct QipReport *report);

/**
 * # Safety
 * `report` must be null or a handle not yet freed.
 */
void qip_report_free(struct QipReport *report);

/**
 * # Safety
 * `s` must be null or a string returned by this library, freed once.
 */
void qip_string_free(char *s);

/**
 * Message of the last failure on this thread, or null. The pointer stays
 * valid until the next call into the library from the same thread.
 */
const char *qip_last_error_message(void);

/**
 * Library version, static storage.
 */
const char *qip_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QIPSOLVE_H */
