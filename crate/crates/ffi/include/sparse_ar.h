#ifndef SPARSE_AR_H
#define SPARSE_AR_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SarStatus {
  SAR_STATUS_OK = 0,
  SAR_STATUS_INVALID_INPUT = 1,
  SAR_STATUS_MODEL = 2,
  SAR_STATUS_DEGENERATE_DATA = 3,
  SAR_STATUS_CONVERGENCE = 4,
  SAR_STATUS_NULL_POINTER = 5,
  SAR_STATUS_PANIC = 6,
} SarStatus;

typedef enum SarFamily {
  SAR_FAMILY_GAUSSIAN = 0,
  SAR_FAMILY_STUDENT_T = 1,
} SarFamily;

typedef enum SarPenaltyKind {
  SAR_PENALTY_KIND_SCAD = 0,
  SAR_PENALTY_KIND_LASSO = 1,
} SarPenaltyKind;

/**
 * Opaque fit result.
 */
typedef struct SarFit SarFit;

/**
 * Opaque observed or simulated series.
 */
typedef struct SarSeries SarSeries;

/**
 * Innovation family; `parameter` is σ for Gaussian and the degrees of
 * freedom for Student-t.
 */
typedef struct SarInnovation {
  enum SarFamily family;
  double parameter;
} SarInnovation;

/**
 * `a` is ignored for LASSO.
 */
typedef struct SarPenalty {
  enum SarPenaltyKind kind;
  double lambda;
  double a;
} SarPenalty;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failing call on this thread; empty after a
 * success. The pointer stays valid until the next `sar_*` call on the same
 * thread.
 */
const char *sar_last_error_message(void);

/**
 * Copies `len` observations into a new series handle.
 *
 * # Safety
 * `values` must point to `len` readable doubles; `out` must be writable.
 */
enum SarStatus sar_series_new(const double *values, size_t len, struct SarSeries **out);

/**
 * # Safety
 * `series` must be null or a live handle.
 */
size_t sar_series_len(const struct SarSeries *series);

/**
 * Borrowed view of the observations, valid while the handle lives.
 *
 * # Safety
 * `series` must be null or a live handle.
 */
const double *sar_series_values(const struct SarSeries *series);

/**
 * # Safety
 * `series` must be null or a handle not yet freed.
 */
void sar_series_free(struct SarSeries *series);

/**
 * Simulates `n` observations of a causal AR model after `burn_in` discarded
 * steps.
 *
 * # Safety
 * `coefficients` must point to `order` doubles; `out` must be writable.
 */
enum SarStatus sar_simulate(const double *coefficients,
                            size_t order,
                            struct SarInnovation innov,
                            size_t n,
                            size_t burn_in,
                            uint64_t seed,
                            struct SarSeries **out);

/**
 * # Safety
 * `series` must be a live handle; `out` must be writable.
 */
enum SarStatus sar_fit_mle(const struct SarSeries *series,
                           size_t order,
                           struct SarInnovation innov,
                           struct SarFit **out);

/**
 * One-step penalized fit at a fixed penalty.
 *
 * # Safety
 * `series` must be a live handle; `out` must be writable.
 */
enum SarStatus sar_fit_pcmle(const struct SarSeries *series,
                             size_t order,
                             struct SarInnovation innov,
                             struct SarPenalty penalty,
                             struct SarFit **out);

/**
 * Holdout-tuned penalized fit over the grid `lambdas × a_values`
 * (`a_values` is ignored for LASSO and may be null with `n_a = 0`).
 *
 * # Safety
 * Array arguments must point to the stated number of doubles; `series`
 * must be a live handle; `out` must be writable.
 */
enum SarStatus sar_tune(const struct SarSeries *series,
                        size_t order,
                        struct SarInnovation innov,
                        enum SarPenaltyKind kind,
                        const double *lambdas,
                        size_t n_lambdas,
                        const double *a_values,
                        size_t n_a,
                        double split_fraction,
                        struct SarFit **out);

/**
 * # Safety
 * `fit` must be null or a live handle.
 */
size_t sar_fit_order(const struct SarFit *fit);

/**
 * Penalty level used, or NaN for an unpenalized fit.
 *
 * # Safety
 * `fit` must be null or a live handle.
 */
double sar_fit_lambda(const struct SarFit *fit);

/**
 * Copies the `order` coefficient estimates into `out` (capacity `len`).
 *
 * # Safety
 * `fit` must be a live handle; `out` must point to `len` writable doubles.
 */
enum SarStatus sar_fit_estimates(const struct SarFit *fit, double *out, size_t len);

/**
 * Copies the standard errors (0 off the support) into `out`.
 *
 * # Safety
 * `fit` must be a live handle; `out` must point to `len` writable doubles.
 */
enum SarStatus sar_fit_std_errors(const struct SarFit *fit, double *out, size_t len);

/**
 * # Safety
 * `fit` must be null or a handle not yet freed.
 */
void sar_fit_free(struct SarFit *fit);

/**
 * # Safety
 * `coefficients` must point to `order` doubles; outputs must be writable.
 */
enum SarStatus sar_check_causality(const double *coefficients,
                                   size_t order,
                                   bool *causal,
                                   double *spectral_radius);

/**
 * Order in `1..=p_max` minimizing the Final Prediction Error.
 *
 * # Safety
 * `series` must be a live handle; `chosen` must be writable.
 */
enum SarStatus sar_fpe_select(const struct SarSeries *series, size_t p_max, size_t *chosen);

/**
 * k-step forecast from the end of `history`.
 *
 * # Safety
 * Arrays must hold the stated number of doubles; `out` must be writable.
 */
enum SarStatus sar_forecast_k(const double *coefficients,
                              size_t order,
                              const double *history,
                              size_t history_len,
                              size_t k,
                              double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SPARSE_AR_H */
