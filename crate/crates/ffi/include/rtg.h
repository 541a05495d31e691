#ifndef RTG_H
#define RTG_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible function.
 */
typedef enum RtgStatus {
  RTG_STATUS_OK = 0,
  RTG_STATUS_INVALID_INPUT = 1,
  RTG_STATUS_UNSUPPORTED = 2,
  RTG_STATUS_NUMERICAL = 3,
  RTG_STATUS_RESOURCE = 4,
  RTG_STATUS_CONFIG = 5,
  RTG_STATUS_IO = 6,
  RTG_STATUS_GATE_FAILED = 7,
  RTG_STATUS_NULL_POINTER = 8,
  RTG_STATUS_PANIC = 9,
} RtgStatus;

/**
 * Opaque fitness model handle.
 */
typedef struct RtgModel RtgModel;

/**
 * A value with its error estimate.
 */
typedef struct RtgEstimate {
  double value;
  double error;
} RtgEstimate;

/**
 * One evaluation of the truncated characteristic-function series.
 */
typedef struct RtgCharFn {
  double re;
  double im;
  size_t order;
  double tail_bound;
} RtgCharFn;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Creates an exponential fitness model with the given rate.
 *
 * # Safety
 * `out` must be valid for writes. Free the handle with `rtg_model_free`.
 */
enum RtgStatus rtg_model_exponential(double rate, struct RtgModel **out);

/**
 * Creates a Pareto fitness model with the given scale and shape.
 *
 * # Safety
 * `out` must be valid for writes. Free the handle with `rtg_model_free`.
 */
enum RtgStatus rtg_model_pareto(double scale, double shape, struct RtgModel **out);

/**
 * Releases a model handle. Null is accepted.
 *
 * # Safety
 * `model` must be null or a live handle; it must not be used afterwards.
 */
void rtg_model_free(struct RtgModel *model);

/**
 * `F(x)`.
 *
 * # Safety
 * `model` must be a live handle and `out` valid for writes.
 */
enum RtgStatus rtg_model_cdf(const struct RtgModel *model, double x, double *out);

/**
 * `1 − F(x)`.
 *
 * # Safety
 * `model` must be a live handle and `out` valid for writes.
 */
enum RtgStatus rtg_model_tail(const struct RtgModel *model, double x, double *out);

/**
 * The limit intensity `λ(x)`.
 *
 * # Safety
 * `model` must be a live handle and `out` valid for writes.
 */
enum RtgStatus rtg_model_intensity(const struct RtgModel *model, double x, double *out);

/**
 * The threshold `θ*_n`.
 *
 * # Safety
 * `model` must be a live handle and `out` valid for writes.
 */
enum RtgStatus rtg_model_scaling_threshold(const struct RtgModel *model, uint64_t n, double *out);

/**
 * Draws `count` fitness values from stream `index` of `seed`.
 *
 * # Safety
 * `model` must be a live handle and `out` valid for `count` writes.
 */
enum RtgStatus rtg_model_sample(const struct RtgModel *model,
                                uint64_t seed,
                                uint64_t index,
                                size_t count,
                                double *out);

/**
 * Degrees of the threshold graph on `fitness` at threshold `theta`.
 *
 * # Safety
 * `fitness` must hold `len` readable values and `out` room for `len`.
 */
enum RtgStatus rtg_degree_sequence(const double *fitness, size_t len, double theta, uint64_t *out);

/**
 * Limiting nodal degree probability `p(d)`.
 *
 * # Safety
 * `model` must be a live handle and `out` valid for writes.
 */
enum RtgStatus rtg_limit_nodal_pmf(const struct RtgModel *model,
                                   uint64_t d,
                                   struct RtgEstimate *out);

/**
 * `P(D_{n,1} = d)` in a graph of size `n` at threshold `theta`.
 *
 * # Safety
 * `model` must be a live handle and `out` valid for writes.
 */
enum RtgStatus rtg_finite_n_nodal_pmf(const struct RtgModel *model,
                                      uint64_t n,
                                      double theta,
                                      uint64_t d,
                                      struct RtgEstimate *out);

/**
 * The exponential-fitness limit law at degree `d`.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum RtgStatus rtg_fujihara_pmf(uint64_t d, struct RtgEstimate *out);

/**
 * `1/(d(d−1))` and its error bound `1/d!`, for `d ≥ 2`.
 *
 * # Safety
 * `approx` and `bound` must be valid for writes.
 */
enum RtgStatus rtg_fujihara_approx(uint64_t d, double *approx, double *bound);

/**
 * `m_r(d)` by quadrature (`tolerance > 0`) or, if `samples > 0`, by
 * sampling with `seed`.
 *
 * # Safety
 * `model` must be a live handle and `out` valid for writes.
 */
enum RtgStatus rtg_joint_moment(const struct RtgModel *model,
                                size_t r,
                                uint64_t d,
                                double tolerance,
                                uint64_t samples,
                                uint64_t seed,
                                struct RtgEstimate *out);

/**
 * Truncated series for `E[exp(i t Π(d))]` with truncation tolerance `eps`.
 *
 * # Safety
 * `model` must be a live handle and `out` valid for writes.
 */
enum RtgStatus rtg_char_fn(const struct RtgModel *model,
                           uint64_t d,
                           double t,
                           double eps,
                           struct RtgCharFn *out);

/**
 * Copies the calling thread's last error message into `buf` (always
 * nul-terminated when `len > 0`) and returns the full message length
 * excluding the terminator; 0 if there is none.
 *
 * # Safety
 * `buf` must be null or valid for `len` writes.
 */
size_t rtg_last_error_message(char *buf, size_t len);

/**
 * Static name of a status code, e.g. `"invalid_input"`.
 */
const char *rtg_status_name(int32_t status);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RTG_H */
