#ifndef CAVITY_NOISE_H
#define CAVITY_NOISE_H

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CnStatus {
  CN_STATUS_OK = 0,
  CN_STATUS_NULL_POINTER = 1,
  CN_STATUS_INVALID_UTF8 = 2,
  CN_STATUS_IO = 3,
  CN_STATUS_PARSE = 4,
  CN_STATUS_INVALID_INPUT = 5,
  CN_STATUS_DOMAIN = 6,
  CN_STATUS_BAND = 7,
  CN_STATUS_NOT_FOUND = 8,
  CN_STATUS_BUFFER_TOO_SMALL = 9,
  CN_STATUS_INTERNAL = 10,
} CnStatus;

/**
 * Noise budget on a frequency grid.
 */
typedef struct CnBudget CnBudget;

/**
 * Loaded cavity configuration.
 */
typedef struct CnModel CnModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *cn_version(void);

/**
 * Message for the last failed call on this thread, or null. Valid until the
 * next call into the library on this thread.
 */
const char *cn_last_error(void);

/**
 * Load a TOML configuration file.
 *
 * # Safety
 * `path` must be a valid NUL-terminated string and `out` a valid pointer.
 */
enum CnStatus cn_model_load(const char *path, struct CnModel **out);

/**
 * # Safety
 * `model` must come from [`cn_model_load`] and not be freed twice. Null is ignored.
 */
void cn_model_free(struct CnModel *model);

/**
 * Cavity linewidth (HWHM) in Hz.
 *
 * # Safety
 * Pointers must be valid.
 */
enum CnStatus cn_model_linewidth_hz(const struct CnModel *model, double *out);

/**
 * Number of operating points in the configuration.
 *
 * # Safety
 * Pointers must be valid.
 */
enum CnStatus cn_model_operating_point_count(const struct CnModel *model, size_t *out);

/**
 * Closed-loop optical-spring frequency in Hz at the labelled operating point.
 * Returns `NotFound` when the point has no spring (e.g. on resonance).
 *
 * # Safety
 * Pointers must be valid; `label` NUL-terminated.
 */
enum CnStatus cn_model_spring_frequency(const struct CnModel *model,
                                        const char *label,
                                        double *out);

/**
 * Budget at the labelled operating point on a log grid. `loop_unity_gain_hz`
 * of zero disables the length-loop readout correction.
 *
 * # Safety
 * Pointers must be valid; `label` NUL-terminated.
 */
enum CnStatus cn_budget_build(const struct CnModel *model,
                              const char *label,
                              double f_min_hz,
                              double f_max_hz,
                              size_t points_per_decade,
                              double loop_unity_gain_hz,
                              struct CnBudget **out);

/**
 * # Safety
 * `budget` must come from [`cn_budget_build`] and not be freed twice. Null is ignored.
 */
void cn_budget_free(struct CnBudget *budget);

/**
 * Grid frequencies in Hz.
 *
 * # Safety
 * `budget` and `len` must be valid; `out` null or writable for `cap` values.
 */
enum CnStatus cn_budget_frequencies(const struct CnBudget *budget,
                                    double *out,
                                    size_t cap,
                                    size_t *len);

/**
 * Total displacement ASD in m/√Hz.
 *
 * # Safety
 * As for [`cn_budget_frequencies`].
 */
enum CnStatus cn_budget_total(const struct CnBudget *budget, double *out, size_t cap, size_t *len);

/**
 * One component's ASD by label (`thermal`, `qrpn`, `shot`, `dark`, `crpn`).
 *
 * # Safety
 * As for [`cn_budget_frequencies`]; `label` NUL-terminated.
 */
enum CnStatus cn_budget_component(const struct CnBudget *budget,
                                  const char *label,
                                  double *out,
                                  size_t cap,
                                  size_t *len);

/**
 * Band rms of the total in metres.
 *
 * # Safety
 * Pointers must be valid.
 */
enum CnStatus cn_budget_band_rms(const struct CnBudget *budget,
                                 double lo_hz,
                                 double hi_hz,
                                 double *out);

/**
 * Share of the band power carried by one component.
 *
 * # Safety
 * Pointers must be valid; `label` NUL-terminated.
 */
enum CnStatus cn_budget_band_fraction(const struct CnBudget *budget,
                                      const char *label,
                                      double lo_hz,
                                      double hi_hz,
                                      double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CAVITY_NOISE_H */
