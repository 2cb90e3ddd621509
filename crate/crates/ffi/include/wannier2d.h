#ifndef WANNIER2D_H
#define WANNIER2D_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Transport method selector.
 */
typedef enum W2dMethod {
  W2D_METHOD_ODE = 0,
  W2D_METHOD_TWIST = 1,
  W2D_METHOD_ALT = 2,
} W2dMethod;

/**
 * Status codes returned by every fallible function.
 */
typedef enum W2dStatus {
  W2D_STATUS_OK = 0,
  /**
   * The band has nonzero Chern number; the result holds the Stage-2 sheet only.
   */
  W2D_STATUS_OBSTRUCTED = 1,
  W2D_STATUS_NULL_POINTER = 2,
  W2D_STATUS_INVALID_ARGUMENT = 3,
  W2D_STATUS_UNKNOWN_MODEL = 4,
  W2D_STATUS_PARSE_ERROR = 5,
  W2D_STATUS_INVALID_MODEL = 6,
  W2D_STATUS_NEAR_DEGENERATE = 7,
  W2D_STATUS_NUMERICAL = 8,
  W2D_STATUS_PANIC = 9,
} W2dStatus;

/**
 * Opaque tight-binding model.
 */
typedef struct W2dModel W2dModel;

/**
 * Opaque pipeline result.
 */
typedef struct W2dResult W2dResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the last failure on this thread. Valid until the next
 * call on the same thread; never NULL.
 */
const char *w2d_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *w2d_version(void);

/**
 * Looks up a built-in model ("square3", "haldane-trivial", "haldane-chern").
 *
 * # Safety
 * `name` must be a NUL-terminated string; `out` must be writable.
 */
enum W2dStatus w2d_model_builtin(const char *name, struct W2dModel **out);

/**
 * Parses a JSON model document.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
enum W2dStatus w2d_model_from_json(const char *json, struct W2dModel **out);

/**
 * Orbital count per cell, or 0 for a NULL handle.
 *
 * # Safety
 * `model` must be NULL or a live handle.
 */
size_t w2d_model_dim(const struct W2dModel *model);

/**
 * Selects the band to localize.
 *
 * # Safety
 * `model` must be NULL or a live handle.
 */
enum W2dStatus w2d_model_set_band(struct W2dModel *model, size_t band);

/**
 * # Safety
 * `model` must be NULL or a handle not yet freed.
 */
void w2d_model_free(struct W2dModel *model);

/**
 * Runs the pipeline on an n×n grid. On `Obstructed` a result is still
 * written: it carries the Chern number and the non-periodic sheet.
 *
 * # Safety
 * `model` must be a live handle; `out` must be writable.
 */
enum W2dStatus w2d_run(const struct W2dModel *model,
                       size_t n,
                       enum W2dMethod method,
                       bool optimize,
                       struct W2dResult **out);

/**
 * Chern number of the band, or 0 for a NULL handle.
 *
 * # Safety
 * `res` must be NULL or a live handle.
 */
int64_t w2d_result_chern(const struct W2dResult *res);

/**
 * Writes the Wannier center (x, y) into `center[0..2]`.
 *
 * # Safety
 * `res` must be a live handle; `center` must point to two writable doubles.
 */
enum W2dStatus w2d_result_center(const struct W2dResult *res, double *center);

/**
 * Writes the variance of the final gauge into `variance`.
 *
 * # Safety
 * `res` must be a live handle; `variance` must be writable.
 */
enum W2dStatus w2d_result_variance(const struct W2dResult *res, double *variance);

/**
 * Bloch Fourier coefficient vector at lattice vector (m1, m2).
 * Writes `dim` real and imaginary parts into `re` and `im`.
 *
 * # Safety
 * `res` must be a live handle; `re` and `im` must each hold `len` doubles.
 */
enum W2dStatus w2d_result_coefficient(const struct W2dResult *res,
                                      int64_t m1,
                                      int64_t m2,
                                      double *re,
                                      double *im,
                                      size_t len);

/**
 * JSON report of the run. Owned by the result; valid until it is freed.
 *
 * # Safety
 * `res` must be NULL or a live handle.
 */
const char *w2d_result_report_json(const struct W2dResult *res);

/**
 * # Safety
 * `res` must be NULL or a handle not yet freed.
 */
void w2d_result_free(struct W2dResult *res);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* WANNIER2D_H */
