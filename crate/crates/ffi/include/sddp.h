#ifndef SDDP_H
#define SDDP_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum SddpStatus {
  SDDP_STATUS_OK = 0,
  SDDP_STATUS_NULL_POINTER = 1,
  SDDP_STATUS_INVALID_ARGUMENT = 2,
  /**
   * Malformed or inconsistent input data.
   */
  SDDP_STATUS_DATA_ERROR = 3,
  /**
   * The solver failed or a subproblem was infeasible.
   */
  SDDP_STATUS_NUMERICAL_ERROR = 4,
  SDDP_STATUS_IO_ERROR = 5,
  SDDP_STATUS_FINGERPRINT_MISMATCH = 6,
  /**
   * The destination buffer is too small; the required length was written.
   */
  SDDP_STATUS_BUFFER_TOO_SMALL = 7,
  SDDP_STATUS_PANIC = 8,
} SddpStatus;

typedef enum SddpSampling {
  SDDP_SAMPLING_UNIFORM = 0,
  SDDP_SAMPLING_RISK = 1,
  SDDP_SAMPLING_ALTERNATING = 2,
} SddpSampling;

typedef struct SddpCase SddpCase;

typedef struct SddpPolicy SddpPolicy;

/**
 * Training parameters. Fill with [`sddp_case_default_config`].
 */
typedef struct SddpConfig {
  size_t max_iterations;
  size_t min_iterations;
  size_t batch_size;
  uint64_t seed;
  /**
   * One of [`SddpSampling`].
   */
  uint32_t sampling;
  double lambda;
  double alpha;
  double stop_gap_tol;
  double ub_confidence;
  bool parallel;
} SddpConfig;

/**
 * One training iteration. `ub_samples` is 0 when the iteration recorded no
 * upper bound, in which case `ub_mean` and `ub_stderr` are NaN.
 */
typedef struct SddpBoundsEntry {
  size_t iteration;
  double lower_bound;
  double ub_mean;
  double ub_stderr;
  size_t ub_samples;
  uint64_t wall_ms;
} SddpBoundsEntry;

/**
 * Message of the last failed call on this thread, empty after a success.
 * Valid until the next call into the library on the same thread.
 */
const char *sddp_last_error(void);

/**
 * Reads and validates a case file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a writable pointer.
 */
enum SddpStatus sddp_case_load(const char *path, struct SddpCase **out);

/**
 * Parses and validates a case from JSON text.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a writable pointer.
 */
enum SddpStatus sddp_case_parse(const char *json, struct SddpCase **out);

/**
 * # Safety
 * `case_handle` must come from `sddp_case_load`/`sddp_case_parse` and not be used
 * afterwards. Null is ignored.
 */
void sddp_case_free(struct SddpCase *case_handle);

/**
 * # Safety
 * `case_handle` must be a live case handle; `stages` and `openings` writable.
 */
enum SddpStatus sddp_case_dimensions(const struct SddpCase *case_handle,
                                     size_t *stages,
                                     size_t *openings);

/**
 * Engine defaults stored in the case file.
 *
 * # Safety
 * `case_handle` must be a live case handle and `out` writable.
 */
enum SddpStatus sddp_case_default_config(const struct SddpCase *case_handle,
                                         struct SddpConfig *out);

/**
 * Optimal cost of the full scenario tree under `(lambda, alpha)`.
 *
 * # Safety
 * `case_handle` must be a live case handle and `out` writable.
 */
enum SddpStatus sddp_detequiv(const struct SddpCase *case_handle,
                              double lambda,
                              double alpha,
                              double *out);

/**
 * Trains a policy.
 *
 * # Safety
 * `case_handle` must be a live case handle, `config` readable and `out` writable.
 */
enum SddpStatus sddp_train(const struct SddpCase *case_handle,
                           const struct SddpConfig *config,
                           struct SddpPolicy **out);

/**
 * # Safety
 * `policy` must come from `sddp_train`/`sddp_policy_load` and not be used
 * afterwards. Null is ignored.
 */
void sddp_policy_free(struct SddpPolicy *policy);

/**
 * Final lower bound and number of iterations run.
 *
 * # Safety
 * `policy` must be a live policy handle; outputs writable.
 */
enum SddpStatus sddp_policy_summary(const struct SddpPolicy *policy,
                                    double *lower_bound,
                                    size_t *iterations);

/**
 * Copies the per-iteration bounds into `buf`. `len` always receives the
 * number of entries; if `capacity` is smaller nothing is copied and
 * `BufferTooSmall` is returned. A policy read from disk has no log.
 *
 * # Safety
 * `policy` must be a live policy handle, `buf` valid for `capacity`
 * entries (may be null when `capacity` is 0) and `len` writable.
 */
enum SddpStatus sddp_policy_bounds(const struct SddpPolicy *policy,
                                   struct SddpBoundsEntry *buf,
                                   size_t capacity,
                                   size_t *len);

/**
 * Exact value of the policy over the whole tree, under the risk measure it
 * was trained with.
 *
 * # Safety
 * `case_handle` and `policy` must be live handles and `out` writable.
 */
enum SddpStatus sddp_policy_evaluate(const struct SddpCase *case_handle,
                                     const struct SddpPolicy *policy,
                                     double *out);

/**
 * Writes the policy as JSON.
 *
 * # Safety
 * `policy` must be a live handle and `path` a NUL-terminated string.
 */
enum SddpStatus sddp_policy_save(const struct SddpPolicy *policy, const char *path);

/**
 * Reads a policy and checks it belongs to `case_handle`.
 *
 * # Safety
 * `case_handle` must be a live handle, `path` a NUL-terminated string and `out`
 * writable.
 */
enum SddpStatus sddp_policy_load(const struct SddpCase *case_handle,
                                 const char *path,
                                 struct SddpPolicy **out);

/**
 * CVaR at level `alpha` of `n` equiprobable values.
 *
 * # Safety
 * `values` must point to `n` doubles and `out` be writable.
 */
enum SddpStatus sddp_cvar(const double *values, size_t n, double alpha, double *out);

/**
 * `(1 - lambda) E + lambda CVaR_alpha` of `n` equiprobable values.
 *
 * # Safety
 * `values` must point to `n` doubles and `out` be writable.
 */
enum SddpStatus sddp_rho(const double *values, size_t n, double lambda, double alpha, double *out);

/**
 * Risk-adjusted sampling weights of `n` cost-to-go values, written to
 * `weights` (room for `n` doubles).
 *
 * # Safety
 * `betas` must point to `n` doubles and `weights` be writable for `n`.
 */
enum SddpStatus sddp_sampling_weights(const double *betas,
                                      size_t n,
                                      double lambda,
                                      double alpha,
                                      double *weights);

#endif  /* SDDP_H */
