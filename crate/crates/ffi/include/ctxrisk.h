#ifndef CTXRISK_H
#define CTXRISK_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Axis selector: 0 for the ν marginal (α, F), 1 for the ω marginal (β, G).
#define CTXRISK_AXIS_NU 0

#define CTXRISK_AXIS_OMEGA 1

// Status code returned by every fallible function.
typedef enum CtxStatus {
  CTX_STATUS_OK = 0,
  CTX_STATUS_NULL_POINTER = 1,
  CTX_STATUS_INVALID_ARGUMENT = 2,
  CTX_STATUS_PARSE = 3,
  CTX_STATUS_VALIDATION = 4,
  CTX_STATUS_INFEASIBLE = 5,
  CTX_STATUS_NUMERIC = 6,
  CTX_STATUS_PANIC = 7,
} CtxStatus;

// Result of [`ctxrisk_identify`].
typedef struct CtxIdentification CtxIdentification;

// A validated scenario plus the numerical settings used for identification.
typedef struct CtxModel CtxModel;

// Scalar outputs of an identification run.
typedef struct CtxScalars {
  double alpha_hat;
  double alpha_times_o_hat;
  double beta_hat;
  double beta_times_o_hat;
  double coverage_f;
  double coverage_g;
  double copula_sup_error;
} CtxScalars;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Creates the reference model. Free with [`ctxrisk_model_free`].
//
// # Safety
// `out` must be null or point to writable storage for a pointer.
enum CtxStatus ctxrisk_model_default(struct CtxModel **out);

// Builds a model from a TOML experiment config (NUL-terminated UTF-8).
// Only the `scenario` and `numeric` sections affect the model.
//
// # Safety
// `toml` must be null or a valid NUL-terminated string; `out` must be null
// or point to writable storage for a pointer.
enum CtxStatus ctxrisk_model_from_toml(const char *toml, struct CtxModel **out);

// Releases a model. Null is ignored.
//
// # Safety
// `model` must be null or a pointer obtained from this library that has
// not been freed yet.
void ctxrisk_model_free(struct CtxModel *model);

// Probability of bundle (1,1) at prices `(x_i, x_ii)`.
//
// # Safety
// `model` must be null or a live model; `out` null or writable.
enum CtxStatus ctxrisk_prob_11(const struct CtxModel *model, double x_i, double x_ii, double *out);

// Probabilities of bundles (1,1), (1,2), (2,1), (2,2), in that order.
//
// # Safety
// `model` must be null or a live model; `out` null or writable for 4 doubles.
enum CtxStatus ctxrisk_bundle_distribution(const struct CtxModel *model,
                                           double x_i,
                                           double x_ii,
                                           double *out);

// Cutoffs `V_I, V_II, W_I, W_II` at prices `(x_i, x_ii)`.
//
// # Safety
// `model` must be null or a live model; `out` null or writable for 4 doubles.
enum CtxStatus ctxrisk_thresholds(const struct CtxModel *model,
                                  double x_i,
                                  double x_ii,
                                  double *out);

// Jump in the one-sided derivatives at `level` along `axis`. An infeasible
// level is not an error: `*feasible` is set to 0 and `*gap` to NaN.
//
// # Safety
// `model` must be null or a live model; `gap` and `feasible` null or writable.
enum CtxStatus ctxrisk_derivative_gap(const struct CtxModel *model,
                                      int32_t axis,
                                      double level,
                                      double *gap,
                                      int32_t *feasible);

// Runs the identification pipeline on exact probabilities. Insufficient
// coverage is reported through the result (NaN shares), not the status.
//
// # Safety
// `model` must be null or a live model; `out` null or writable.
enum CtxStatus ctxrisk_identify(const struct CtxModel *model, struct CtxIdentification **out);

// Releases an identification result. Null is ignored.
//
// # Safety
// `result` must be null or a pointer obtained from [`ctxrisk_identify`]
// that has not been freed yet.
void ctxrisk_identification_free(struct CtxIdentification *result);

// # Safety
// `result` must be null or live; `out` null or writable.
enum CtxStatus ctxrisk_identification_scalars(const struct CtxIdentification *result,
                                              struct CtxScalars *out);

// Number of grid points of the marginal on `axis`.
//
// # Safety
// `result` must be null or live; `out` null or writable.
enum CtxStatus ctxrisk_identification_grid_len(const struct CtxIdentification *result,
                                               int32_t axis,
                                               size_t *out);

// Copies grid levels, gaps and recovered cdf values of one marginal into
// caller buffers of length `len`, which must equal the grid length.
// Infeasible gaps and cdf values outside the feasible hull are NaN.
//
// # Safety
// `result` must be null or live; each buffer null or writable for `len` doubles.
enum CtxStatus ctxrisk_identification_marginal(const struct CtxIdentification *result,
                                               int32_t axis,
                                               double *levels,
                                               double *gaps,
                                               double *cdf,
                                               size_t len);

// Number of points on the copula grid.
//
// # Safety
// `result` must be null or live; `out` null or writable.
enum CtxStatus ctxrisk_identification_copula_len(const struct CtxIdentification *result,
                                                 size_t *out);

// Copies the copula grid `(u, v)`, recovered values and model values into
// caller buffers of length `len`. Missing values are NaN.
//
// # Safety
// `result` must be null or live; each buffer null or writable for `len` doubles.
enum CtxStatus ctxrisk_identification_copula(const struct CtxIdentification *result,
                                             double *u,
                                             double *v,
                                             double *c_hat,
                                             double *c_true,
                                             size_t len);

// Message for the last failed call on this thread; empty after a success.
// The pointer stays valid until the next call into this library on the
// same thread.
const char *ctxrisk_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *ctxrisk_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CTXRISK_H */
