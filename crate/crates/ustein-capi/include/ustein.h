#ifndef USTEIN_H
#define USTEIN_H

/* Generated by cbindgen from ustein-capi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible entry point.
 */
typedef enum UsteinStatus {
  UsteinStatus_Ok = 0,
  /**
   * Malformed config, unknown model, bad parameters.
   */
  UsteinStatus_ConfigError = 1,
  /**
   * Numerical precondition failure (non-PD matrix, cost guard, NaN).
   */
  UsteinStatus_NumericalError = 2,
  /**
   * The verify pipeline ran but a check failed (output is still set).
   */
  UsteinStatus_VerificationFailed = 3,
  /**
   * A required pointer argument was null.
   */
  UsteinStatus_NullPointer = 4,
  /**
   * Unexpected internal failure (caught panic).
   */
  UsteinStatus_InternalError = 5,
} UsteinStatus;

/**
 * Opaque handle to a validated model.
 */
typedef struct UsteinModel UsteinModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static string; do not free.
 */
const char *ustein_version(void);

/**
 * Message for the most recent failure on this thread, or null. Valid
 * until the next ustein call on the same thread; do not free.
 */
const char *ustein_last_error(void);

/**
 * Frees a string returned through an `out` parameter.
 *
 * # Safety
 * `s` must be null or a pointer previously returned by this library
 * through an `out` parameter, not yet freed.
 */
void ustein_string_free(char *s);

/**
 * Builds a model from a JSON config document (the same schema the CLI
 * reads; only the `model` and `C` sections are used here).
 *
 * # Safety
 * `config_json` must be a NUL-terminated string; `out_model` must be a
 * valid writable pointer.
 */
enum UsteinStatus ustein_model_from_json(const char *config_json, struct UsteinModel **out_model);

/**
 * Number of U-statistic components, or -1 on a null handle.
 *
 * # Safety
 * `model` must be null or a live handle from [`ustein_model_from_json`].
 */
int32_t ustein_model_dimension(const struct UsteinModel *model);

/**
 * Kernel order of component `i` (0-based), or -1 when out of range.
 *
 * # Safety
 * `model` must be null or a live handle from [`ustein_model_from_json`].
 */
int32_t ustein_model_order(const struct UsteinModel *model, uint32_t i);

/**
 * Total mass `μ(E)` of the model's intensity measure; NaN on null.
 *
 * # Safety
 * `model` must be null or a live handle from [`ustein_model_from_json`].
 */
double ustein_model_total_mass(const struct UsteinModel *model);

/**
 * Releases a model handle.
 *
 * # Safety
 * `model` must be null or a live handle, not yet freed.
 */
void ustein_model_free(struct UsteinModel *model);

/**
 * Runs the bound pipeline; on `Ok`, `out_json` holds the pretty-printed
 * report.
 *
 * # Safety
 * `config_json` must be NUL-terminated; `out_json` must be writable.
 */
enum UsteinStatus ustein_run_bound(const char *config_json, char **out_json);

/**
 * Runs the verify pipeline. Returns `VerificationFailed` (with the full
 * report still written) when a check fails.
 *
 * # Safety
 * `config_json` must be NUL-terminated; `out_json` must be writable.
 */
enum UsteinStatus ustein_run_verify(const char *config_json, char **out_json);

/**
 * Runs the sweep pipeline; on `Ok`, `out_csv` holds the plot-ready CSV.
 *
 * # Safety
 * `config_json` must be NUL-terminated; `out_csv` must be writable.
 */
enum UsteinStatus ustein_run_sweep_csv(const char *config_json, char **out_csv);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* USTEIN_H */
