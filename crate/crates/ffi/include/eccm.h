#ifndef ECCM_H
#define ECCM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum EccmStatus {
  ECCM_STATUS_OK = 0,
  ECCM_STATUS_INVALID_ARGUMENT = 1,
  ECCM_STATUS_NULL_POINTER = 2,
  ECCM_STATUS_NO_CONVERGENCE = 3,
  ECCM_STATUS_SINGULAR_INNOVATION = 4,
  ECCM_STATUS_INFEASIBLE = 5,
  ECCM_STATUS_MAX_ITERATIONS = 6,
  ECCM_STATUS_INCENTIVE_VIOLATION = 7,
  ECCM_STATUS_DEGENERATE_LIKELIHOOD = 8,
  ECCM_STATUS_NO_INCENTIVIZABLE_LEVEL = 9,
  ECCM_STATUS_CONFIG = 10,
  ECCM_STATUS_IO = 11,
  ECCM_STATUS_BUFFER_TOO_SMALL = 12,
  ECCM_STATUS_PANIC = 13,
} EccmStatus;

typedef enum EccmSolveMode {
  ECCM_SOLVE_MODE_FULL = 0,
  ECCM_SOLVE_MODE_RELAXED = 1,
  ECCM_SOLVE_MODE_AFFINE = 2,
} EccmSolveMode;

/**
 * Opaque jamming channel.
 */
typedef struct EccmChannel EccmChannel;

/**
 * Opaque contract solution.
 */
typedef struct EccmSolution EccmSolution;

/**
 * Opaque simulation trace.
 */
typedef struct EccmTrace EccmTrace;

/**
 * Scalar fields of a solution.
 */
typedef struct EccmSolutionSummary {
  /**
   * 0-based grid index of the incentivized level.
   */
  size_t j_star_index;
  double j_star;
  double radar_value;
  double jammer_value;
  double kkt_residual;
} EccmSolutionSummary;

/**
 * One simulation record.
 */
typedef struct EccmRecord {
  size_t t;
  size_t n;
  double lambda_max;
  double snr_bar;
  double j_star;
  double radar_utility;
  double jammer_utility;
  double kkt_residual;
} EccmRecord;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *eccm_version(void);

/**
 * Message of the last failed call on this thread, or NULL. Valid until the
 * next `eccm_*` call on the same thread.
 */
const char *eccm_last_error_message(void);

/**
 * Builds a channel from `m` levels and a row-major `m×m` probability matrix.
 * Rows within 1e-3 of summing to one are renormalized.
 *
 * # Safety
 * `levels` must point to `m` doubles, `probs` to `m*m` doubles, `out` to a
 * writable handle slot.
 */
enum EccmStatus eccm_channel_new(const double *levels,
                                 size_t m,
                                 const double *probs,
                                 struct EccmChannel **out);

/**
 * # Safety
 * `channel` must come from [`eccm_channel_new`] and not be used afterwards.
 */
void eccm_channel_free(struct EccmChannel *channel);

/**
 * # Safety
 * `channel` must be a live handle; `tp2` and `tail_convex` writable.
 */
enum EccmStatus eccm_channel_check_structure(const struct EccmChannel *channel,
                                             bool *tp2,
                                             bool *tail_convex);

/**
 * Best contract over all levels.
 *
 * # Safety
 * `channel` must be a live handle and `out` writable.
 */
enum EccmStatus eccm_solve_pap(const struct EccmChannel *channel,
                               double c1,
                               double c2,
                               double sigma,
                               enum EccmSolveMode mode,
                               struct EccmSolution **out);

/**
 * Contract for one fixed level (0-based); `ECCM_STATUS_INFEASIBLE` when the
 * level cannot be incentivized.
 *
 * # Safety
 * `channel` must be a live handle and `out` writable.
 */
enum EccmStatus eccm_solve_level(const struct EccmChannel *channel,
                                 double c1,
                                 double c2,
                                 double sigma,
                                 size_t level,
                                 enum EccmSolveMode mode,
                                 struct EccmSolution **out);

/**
 * # Safety
 * `solution` must come from a solve call and not be used afterwards.
 */
void eccm_solution_free(struct EccmSolution *solution);

/**
 * Number of grid levels (length of the strategy vectors).
 *
 * # Safety
 * `solution` must be a live handle or NULL (returns 0).
 */
size_t eccm_solution_size(const struct EccmSolution *solution);

/**
 * # Safety
 * `solution` must be a live handle and `out` writable.
 */
enum EccmStatus eccm_solution_summary(const struct EccmSolution *solution,
                                      struct EccmSolutionSummary *out);

/**
 * Copies the log-strategy `x*` into `out[0..size]`.
 *
 * # Safety
 * `solution` must be a live handle; `out` must hold `len` doubles.
 */
enum EccmStatus eccm_solution_x_star(const struct EccmSolution *solution, double *out, size_t len);

/**
 * Copies the pulse powers `π* = exp(x*)` into `out[0..size]`.
 *
 * # Safety
 * `solution` must be a live handle; `out` must hold `len` doubles.
 */
enum EccmStatus eccm_solution_pi_star(const struct EccmSolution *solution, double *out, size_t len);

/**
 * Steady-state barrage-jamming covariance for a `d`-state model observed
 * through a `p×d` matrix. Matrices are row-major. `sigma_out` may be NULL;
 * otherwise it receives the `d×d` covariance.
 *
 * # Safety
 * `a` and `q` must hold `d*d` doubles, `c` `p*d`, `lambda_max` must be
 * writable, and `sigma_out` NULL or `d*d` doubles.
 */
enum EccmStatus eccm_solve_are_barrage(const double *a,
                                       const double *q,
                                       const double *c,
                                       size_t d,
                                       size_t p,
                                       double snr_bar,
                                       double *lambda_max,
                                       double *sigma_out);

/**
 * Runs the closed-loop simulation described by a JSON configuration.
 *
 * # Safety
 * `config_json` must be a NUL-terminated UTF-8 string; `out` writable.
 */
enum EccmStatus eccm_simulate_json(const char *config_json, struct EccmTrace **out);

/**
 * # Safety
 * `trace` must be a live handle or NULL (returns 0).
 */
size_t eccm_trace_len(const struct EccmTrace *trace);

/**
 * # Safety
 * `trace` must be a live handle and `out` writable.
 */
enum EccmStatus eccm_trace_record(const struct EccmTrace *trace,
                                  size_t index,
                                  struct EccmRecord *out);

/**
 * # Safety
 * `trace` must come from [`eccm_simulate_json`] and not be used afterwards.
 */
void eccm_trace_free(struct EccmTrace *trace);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ECCM_H */
