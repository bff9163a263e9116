/* C interface of the fixedpoint toolkit. */

#ifndef FIXEDPOINT_H
#define FIXEDPOINT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status code returned by every fallible call.
 */
typedef enum FpStatus {
  FP_STATUS_OK = 0,
  FP_STATUS_NULL_POINTER = 1,
  FP_STATUS_INVALID_ARGUMENT = 2,
  FP_STATUS_DIMENSION_MISMATCH = 3,
  FP_STATUS_SCHEDULE_REJECTED = 4,
  FP_STATUS_JSON_ERROR = 5,
  FP_STATUS_ORACLE_FAILURE = 6,
  FP_STATUS_NOT_CONVERGED = 7,
  FP_STATUS_PROBE_REJECTED = 8,
  FP_STATUS_INTERNAL_ERROR = 9,
} FpStatus;

/**
 * Opaque nonexpansive operator handle.
 */
typedef struct FpOperator FpOperator;

/**
 * Opaque schedule handle.
 */
typedef struct FpSchedule FpSchedule;

/**
 * Opaque operator-sequence handle.
 */
typedef struct FpSequence FpSequence;

/**
 * Opaque iteration-trace handle.
 */
typedef struct FpTrace FpTrace;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the calling thread's last error message into `buf` (NUL
 * terminated, truncated to `cap` bytes) and returns the full message
 * length in bytes, excluding the terminator. Passing a null buffer or a
 * zero capacity just queries the length.
 */
size_t fp_last_error_message(char *buf, size_t cap);

/**
 * Builds an operator from its JSON description (same schema as the CLI
 * problem files) for the given ambient dimension.
 */
enum FpStatus fp_operator_from_json(const char *json, size_t dim, struct FpOperator **out);

/**
 * Metric projection operator onto a primitive convex set (JSON form).
 */
enum FpStatus fp_operator_projection(const char *set_json, struct FpOperator **out);

/**
 * Ambient dimension of an operator, or 0 for a null handle.
 */
size_t fp_operator_dim(const struct FpOperator *op);

/**
 * Applies an operator to `x` (length `dim`), writing the image to `out`
 * (length `dim`).
 */
enum FpStatus fp_operator_apply(const struct FpOperator *op,
                                const double *x,
                                size_t dim,
                                double *out);

/**
 * Builds a schedule from its JSON description.
 */
enum FpStatus fp_schedule_from_json(const char *json, struct FpSchedule **out);

/**
 * Schedule value at index `n >= 1`.
 */
enum FpStatus fp_schedule_value(const struct FpSchedule *schedule, size_t n, double *out);

/**
 * Constant sequence `S_n = T`; the operator must carry a fixed set and a
 * firmly-nonexpansive or averaged certificate.
 */
enum FpStatus fp_sequence_constant(const struct FpOperator *op, struct FpSequence **out);

/**
 * Resolvent sequence of the scalar function `f_json` with parameter
 * schedule `lambdas` in dimension `dim`.
 */
enum FpStatus fp_sequence_resolvent(const char *f_json,
                                    const struct FpSchedule *lambdas,
                                    size_t dim,
                                    struct FpSequence **out);

/**
 * Common-fixed-point sequence over `n_ops` member operators with the
 * default geometric mixing table and relaxation schedule `gamma`.
 */
enum FpStatus fp_sequence_cfp(const struct FpOperator *const *ops,
                              size_t n_ops,
                              const struct FpSchedule *gamma,
                              struct FpSequence **out);

/**
 * Applies the `n`-th member of a sequence (`n >= 1`).
 */
enum FpStatus fp_sequence_apply(const struct FpSequence *seq,
                                size_t n,
                                const double *x,
                                size_t dim,
                                double *out);

/**
 * Runs the anchored iteration `x_{n+1} = a_n u + (1 - a_n) S_n x_n`.
 *
 * `target_tol` and `reference` may be null; when both are supplied the run
 * also stops once `||x_n - reference|| <= *target_tol`. The returned trace
 * must be released with `fp_trace_free`.
 */
enum FpStatus fp_halpern(const struct FpSequence *seq,
                         const double *u,
                         const double *x1,
                         size_t dim,
                         const struct FpSchedule *alpha,
                         size_t max_iters,
                         double residual_tol,
                         const double *target_tol,
                         const double *reference,
                         struct FpTrace **out);

/**
 * Number of recorded steps in a trace (0 for a null handle).
 */
size_t fp_trace_steps(const struct FpTrace *trace);

/**
 * Stop reason of a trace: 0 residual met, 1 target met, 2 step budget
 * exhausted, -1 for a null handle.
 */
int fp_trace_stop_reason(const struct FpTrace *trace);

/**
 * Copies the final iterate into `out` (length `dim`).
 */
enum FpStatus fp_trace_final(const struct FpTrace *trace, double *out, size_t dim);

/**
 * Copies per-step residuals into the supplied buffers (each of length
 * `len`, which must equal `fp_trace_steps`). Either buffer may be null to
 * skip it.
 */
enum FpStatus fp_trace_residuals(const struct FpTrace *trace,
                                 double *seq_residuals,
                                 double *target_residuals,
                                 size_t len);

/**
 * Certified projection of `u` onto the intersection of the sets described
 * by `sets_json` (a JSON array of convex-set descriptors). Writes the
 * projection to `out` (length `dim`) and, when `certified_tol` is not
 * null, the certified tolerance of the result.
 */
enum FpStatus fp_project_intersection(const char *sets_json,
                                      const double *u,
                                      size_t dim,
                                      double *out,
                                      double *certified_tol);

/**
 * Ground-truth scalar resolvent value of the function described by
 * `f_json` at parameter `lambda` and point `x`.
 */
enum FpStatus fp_prox_scalar(const char *f_json, double lambda, double x, double *out);

/**
 * Solves the anchor-path equation `z = t u + (1 - t) T z` to the given
 * tolerance.
 */
enum FpStatus fp_anchor_point(const struct FpOperator *op,
                              const double *u,
                              size_t dim,
                              double t,
                              double tol,
                              double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FIXEDPOINT_H */
