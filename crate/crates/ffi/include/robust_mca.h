#ifndef ROBUST_MCA_H
#define ROBUST_MCA_H

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes; the nonzero values match the CLI exit codes where they overlap.
 */
typedef enum {
  RMCA_STATUS_OK = 0,
  RMCA_STATUS_IO = 1,
  RMCA_STATUS_CONFIG = 2,
  RMCA_STATUS_NUMERIC = 3,
  RMCA_STATUS_CONTRACT = 4,
  RMCA_STATUS_NULL_POINTER = 5,
  RMCA_STATUS_PANIC = 6,
} RmcaStatus;

typedef struct RmcaConfig RmcaConfig;

typedef struct RmcaResult RmcaResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Parses and validates a JSON configuration.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
RmcaStatus rmca_config_from_json(const char *json, RmcaConfig **out);

/**
 * Parses and validates a TOML configuration.
 *
 * # Safety
 * `toml` must be a NUL-terminated string and `out` a valid pointer.
 */
RmcaStatus rmca_config_from_toml(const char *toml, RmcaConfig **out);

/**
 * The cut-off call experiment preset (N = 1200).
 *
 * # Safety
 * `out` must be a valid pointer.
 */
RmcaStatus rmca_config_fig1_preset(RmcaConfig **out);

/**
 * Sets the number of time steps (`h = T / steps`).
 *
 * # Safety
 * `config` must come from an `rmca_config_*` constructor.
 */
RmcaStatus rmca_config_set_steps(RmcaConfig *config, size_t steps);

/**
 * # Safety
 * `config` must come from an `rmca_config_*` constructor or be null.
 */
void rmca_config_free(RmcaConfig *config);

/**
 * Runs the backward recursion of `config`.
 *
 * # Safety
 * `config` must be a live handle and `out` a valid pointer.
 */
RmcaStatus rmca_price(const RmcaConfig *config, RmcaResult **out);

/**
 * # Safety
 * `result` must be a live handle and `price` a valid pointer.
 */
RmcaStatus rmca_result_price(const RmcaResult *result, double *price);

/**
 * # Safety
 * `result` must be a live handle and `h` a valid pointer.
 */
RmcaStatus rmca_result_h(const RmcaResult *result, double *h);

/**
 * # Safety
 * `result` must be a live handle and `steps` a valid pointer.
 */
RmcaStatus rmca_result_steps(const RmcaResult *result, size_t *steps);

/**
 * Number of points of the value curve; 0 for a null handle.
 *
 * # Safety
 * `result` must be a live handle or null.
 */
size_t rmca_result_curve_len(const RmcaResult *result);

/**
 * Copies the value curve into `xs` and `values`, each of length `len`, which
 * must equal [`rmca_result_curve_len`].
 *
 * # Safety
 * `xs` and `values` must be valid for `len` writes.
 */
RmcaStatus rmca_result_copy_curve(const RmcaResult *result, double *xs, double *values, size_t len);

/**
 * # Safety
 * `result` must come from [`rmca_price`] or be null.
 */
void rmca_result_free(RmcaResult *result);

/**
 * Message of the last failed call on this thread, or null. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *rmca_last_error(void);

const char *rmca_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ROBUST_MCA_H */
