#ifndef ERGM_EXCHANGE_H
#define ERGM_EXCHANGE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum ErgmStatus {
  ERGM_STATUS_OK = 0,
  ERGM_STATUS_NULL_POINTER = 1,
  // Invalid configuration, statistic or parameter dimension.
  ERGM_STATUS_CONFIG = 2,
  // Unreadable or malformed network data.
  ERGM_STATUS_DATA = 3,
  // Numerical failure during sampling or summarising.
  ERGM_STATUS_NUMERICAL = 4,
  // A string argument was not valid UTF-8.
  ERGM_STATUS_INVALID_UTF8 = 5,
  // The output buffer is too small.
  ERGM_STATUS_BUFFER_TOO_SMALL = 6,
  ERGM_STATUS_PANIC = 7,
} ErgmStatus;

// Opaque run configuration.
typedef struct ErgmConfig ErgmConfig;

// Opaque result of one fit.
typedef struct ErgmFit ErgmFit;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread; empty if none. The
// pointer stays valid until the next failing call on the same thread.
const char *ergm_last_error(void);

// Library version as a static NUL-terminated string.
const char *ergm_version(void);

// Parses a JSON run configuration into `*out`.
//
// # Safety
// `json` must be a NUL-terminated string and `out` a valid pointer.
enum ErgmStatus ergm_config_from_json(const char *json, struct ErgmConfig **out);

// Loads a bundled preset (`florentine`, `karate`, `fauxmesa`, `fauxmesa-smoke`).
//
// # Safety
// `name` must be a NUL-terminated string and `out` a valid pointer.
enum ErgmStatus ergm_config_from_preset(const char *name, struct ErgmConfig **out);

// # Safety
// `cfg` must be a live handle from this library.
enum ErgmStatus ergm_config_set_seed(struct ErgmConfig *cfg, uint64_t seed);

// Selects the algorithm by name, e.g. `"AAEA-2+DR"` or `"ads-aea"`.
//
// # Safety
// `cfg` must be a live handle and `name` a NUL-terminated string.
enum ErgmStatus ergm_config_set_algorithm(struct ErgmConfig *cfg, const char *name);

// Sets the number of main iterations per chain. Per-variant overrides in
// the configuration still take precedence.
//
// # Safety
// `cfg` must be a live handle from this library.
enum ErgmStatus ergm_config_set_main_iters(struct ErgmConfig *cfg, size_t iters);

// Serialises the configuration as JSON into `*out`; release it with
// `ergm_string_free`.
//
// # Safety
// `cfg` must be a live handle and `out` a valid pointer.
enum ErgmStatus ergm_config_to_json(const struct ErgmConfig *cfg, char **out);

// # Safety
// `cfg` must be null or a handle from this library not yet freed.
void ergm_config_free(struct ErgmConfig *cfg);

// Runs the configured algorithm and stores the result in `*out`.
//
// # Safety
// `cfg` must be a live handle and `out` a valid pointer.
enum ErgmStatus ergm_fit(const struct ErgmConfig *cfg, struct ErgmFit **out);

// Number of parameters, or 0 for a null handle.
//
// # Safety
// `fit` must be null or a live handle.
size_t ergm_fit_dim(const struct ErgmFit *fit);

// Number of pooled post-burn-in samples, or 0 for a null handle.
//
// # Safety
// `fit` must be null or a live handle.
size_t ergm_fit_sample_count(const struct ErgmFit *fit);

// Copies the pooled samples, row-major `count × dim`, into `buf`.
//
// # Safety
// `fit` must be a live handle and `buf` valid for `len` doubles.
enum ErgmStatus ergm_fit_samples(const struct ErgmFit *fit, double *buf, size_t len);

// Posterior means, one per parameter.
//
// # Safety
// `fit` must be a live handle and `buf` valid for `len` doubles.
enum ErgmStatus ergm_fit_mean(const struct ErgmFit *fit, double *buf, size_t len);

// Posterior standard deviations, one per parameter.
//
// # Safety
// `fit` must be a live handle and `buf` valid for `len` doubles.
enum ErgmStatus ergm_fit_sd(const struct ErgmFit *fit, double *buf, size_t len);

// Effective sample sizes, one per parameter; NaN where undefined.
//
// # Safety
// `fit` must be a live handle and `buf` valid for `len` doubles.
enum ErgmStatus ergm_fit_ess(const struct ErgmFit *fit, double *buf, size_t len);

// Acceptance rates of the first stage, the second stage and overall.
//
// # Safety
// `fit` must be a live handle; each output pointer must be valid.
enum ErgmStatus ergm_fit_acceptance(const struct ErgmFit *fit,
                                    double *stage1,
                                    double *stage2,
                                    double *overall);

// Seconds spent sampling, or NaN for a null handle.
//
// # Safety
// `fit` must be null or a live handle.
double ergm_fit_wall_time(const struct ErgmFit *fit);

// Full summary as JSON into `*out`; release it with `ergm_string_free`.
//
// # Safety
// `fit` must be a live handle and `out` a valid pointer.
enum ErgmStatus ergm_fit_report_json(const struct ErgmFit *fit, char **out);

// # Safety
// `fit` must be null or a handle from this library not yet freed.
void ergm_fit_free(struct ErgmFit *fit);

// # Safety
// `s` must be null or a string returned by this library not yet freed.
void ergm_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ERGM_EXCHANGE_H */
