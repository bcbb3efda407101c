#ifndef PARTEXP_H
#define PARTEXP_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

/**
 * Status codes shared by all entry points.
 */
typedef enum PxStatus {
  PX_STATUS_OK = 0,
  PX_STATUS_NULL_POINTER = 1,
  PX_STATUS_INVALID_ARGUMENT = 2,
  PX_STATUS_UNKNOWN_METHOD = 3,
  PX_STATUS_UNKNOWN_PROBLEM = 4,
  /**
   * The integration or a phi evaluation failed numerically.
   */
  PX_STATUS_NUMERICAL = 5,
  /**
   * The output buffer is shorter than the state dimension.
   */
  PX_STATUS_BUFFER_TOO_SMALL = 6,
  /**
   * A Rust panic was caught at the boundary.
   */
  PX_STATUS_INTERNAL = 7,
} PxStatus;

/**
 * Opaque integration method.
 */
typedef struct PxMethod PxMethod;

/**
 * Opaque partitioned initial value problem.
 */
typedef struct PxProblem PxProblem;

/**
 * Counters reported by the integrators.
 */
typedef struct PxStats {
  size_t steps;
  size_t rejects;
  size_t rhs_evals;
  size_t krylov_dim_total;
} PxStats;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or null. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *px_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *px_version(void);

/**
 * Builtin method by name (e.g. "pexpw3a").
 *
 * # Safety
 * `name` must be a NUL-terminated string and `out` a valid pointer.
 */
enum PxStatus px_method_builtin(const char *name, struct PxMethod **out);

/**
 * Method from a tableau in the JSON exchange format.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum PxStatus px_method_from_json(const char *json, struct PxMethod **out);

/**
 * # Safety
 * `method` must come from a `px_method_*` constructor and not be used
 * afterwards. Null is ignored.
 */
void px_method_free(struct PxMethod *method);

/**
 * Classical order of the method, or 0 for a null handle.
 *
 * # Safety
 * `method` must be null or a live handle.
 */
size_t px_method_order(const struct PxMethod *method);

/**
 * Checks the order conditions of the main and embedded weights in exact
 * arithmetic. `passed` is set to whether every residual is at most `tol`,
 * `max_residual` to the largest residual.
 *
 * # Safety
 * `method` must be a live handle; the out pointers must be valid.
 */
enum PxStatus px_method_verify(const struct PxMethod *method,
                               double tol,
                               bool *passed,
                               double *max_residual);

/**
 * Benchmark problem by name. `size` 0 selects the default grid; `seed`
 * drives the random initial data where a problem has any.
 *
 * # Safety
 * `name` must be a NUL-terminated string and `out` a valid pointer.
 */
enum PxStatus px_problem_build(const char *name,
                               size_t size,
                               uint64_t seed,
                               struct PxProblem **out);

/**
 * # Safety
 * `problem` must come from [`px_problem_build`] and not be used afterwards.
 * Null is ignored.
 */
void px_problem_free(struct PxProblem *problem);

/**
 * State dimension, or 0 for a null handle.
 *
 * # Safety
 * `problem` must be null or a live handle.
 */
size_t px_problem_dim(const struct PxProblem *problem);

/**
 * Writes t0 and tf.
 *
 * # Safety
 * `problem` must be a live handle; the out pointers must be valid.
 */
enum PxStatus px_problem_span(const struct PxProblem *problem, double *t0, double *tf);

/**
 * Copies the initial state into `y` (length `len`).
 *
 * # Safety
 * `problem` must be a live handle and `y` valid for `len` writes.
 */
enum PxStatus px_problem_initial_state(const struct PxProblem *problem, double *y, size_t len);

/**
 * Integrates over the problem span with constant step `h` and writes the
 * endpoint into `y`. `stats` may be null.
 *
 * # Safety
 * Handles must be live, `y` valid for `len` writes, `stats` null or valid.
 */
enum PxStatus px_integrate_fixed(const struct PxMethod *method,
                                 const struct PxProblem *problem,
                                 double h,
                                 double *y,
                                 size_t len,
                                 struct PxStats *stats);

/**
 * Embedded-error controlled integration with tolerance `tol`.
 *
 * # Safety
 * As for [`px_integrate_fixed`].
 */
enum PxStatus px_integrate_adaptive(const struct PxMethod *method,
                                    const struct PxProblem *problem,
                                    double tol,
                                    double *y,
                                    size_t len,
                                    struct PxStats *stats);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PARTEXP_H */
