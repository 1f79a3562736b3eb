#ifndef LCESIM_H
#define LCESIM_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

/**
 * Result codes shared by every entry point.
 */
typedef enum {
  LCESIM_STATUS_OK = 0,
  LCESIM_STATUS_NULL_POINTER = 1,
  LCESIM_STATUS_INVALID_UTF8 = 2,
  LCESIM_STATUS_CONFIG = 3,
  LCESIM_STATUS_INVALID_GRID = 4,
  /**
   * Non-finite values or a director outside the angle chart.
   */
  LCESIM_STATUS_NUMERICAL = 5,
  LCESIM_STATUS_CONSTRAINT_VIOLATION = 6,
  LCESIM_STATUS_WINDOW_VIOLATION = 7,
  LCESIM_STATUS_CHECKPOINT = 8,
  LCESIM_STATUS_IO = 9,
  LCESIM_STATUS_UNKNOWN_PRESET = 10,
  LCESIM_STATUS_OUT_OF_RANGE = 11,
  LCESIM_STATUS_OTHER = 12,
  LCESIM_STATUS_PANIC = 13,
} LcesimStatus;

/**
 * Parsed and validated run configuration.
 */
typedef struct LcesimConfig LcesimConfig;

/**
 * A run in progress.
 */
typedef struct LcesimStepper LcesimStepper;

/**
 * Constraint residuals of the current state.
 */
typedef struct {
  double div_u;
  double div_ht;
  double curl_compat;
  double director_norm;
  double tangency;
} LcesimConstraints;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the latest failure on this thread, or NULL. Valid until the next failing call.
 */
const char *lcesim_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *lcesim_version(void);

/**
 * Parses TOML configuration text (a bare `preset = name` line is allowed).
 *
 * # Safety
 * `toml` must be a NUL-terminated string and `out` a valid pointer.
 */
LcesimStatus lcesim_config_parse(const char *toml, LcesimConfig **out);

/**
 * Configuration of a registered preset.
 *
 * # Safety
 * `name` must be a NUL-terminated string and `out` a valid pointer.
 */
LcesimStatus lcesim_config_preset(const char *name, LcesimConfig **out);

/**
 * Overrides the end time.
 *
 * # Safety
 * `cfg` must come from `lcesim_config_parse` or `lcesim_config_preset`.
 */
LcesimStatus lcesim_config_set_t_end(LcesimConfig *cfg, double t_end);

/**
 * # Safety
 * `cfg` must be NULL or a handle not yet freed.
 */
void lcesim_config_free(LcesimConfig *cfg);

/**
 * Builds the initial state; the configuration is copied and stays owned by the caller.
 *
 * # Safety
 * `cfg` must be a live configuration handle and `out` a valid pointer.
 */
LcesimStatus lcesim_stepper_new(const LcesimConfig *cfg, LcesimStepper **out);

/**
 * Restores a run from a checkpoint file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
LcesimStatus lcesim_stepper_resume(const char *path, LcesimStepper **out);

/**
 * Advances up to `steps` steps, stopping early at the end time.
 *
 * # Safety
 * `st` must be a live stepper handle.
 */
LcesimStatus lcesim_stepper_advance(LcesimStepper *st, uint64_t steps);

/**
 * Writes a checkpoint of the current state.
 *
 * # Safety
 * `st` must be a live stepper handle and `path` a NUL-terminated string.
 */
LcesimStatus lcesim_stepper_checkpoint(LcesimStepper *st, const char *path);

/**
 * Current time, step count, and whether the end time is reached.
 *
 * # Safety
 * `st` must be a live stepper handle; each output pointer may be NULL.
 */
LcesimStatus lcesim_stepper_progress(const LcesimStepper *st,
                                     double *t,
                                     uint64_t *step,
                                     bool *done);

/**
 * Basic (conserved) energy of the current state.
 *
 * # Safety
 * `st` must be a live stepper handle and `out` a valid pointer.
 */
LcesimStatus lcesim_stepper_energy(const LcesimStepper *st, double *out);

/**
 * Constraint residuals recorded after the latest step.
 *
 * # Safety
 * `st` must be a live stepper handle and `out` a valid pointer.
 */
LcesimStatus lcesim_stepper_constraints(const LcesimStepper *st, LcesimConstraints *out);

/**
 * Number of scalar components of the state and grid points per component.
 *
 * # Safety
 * `st` must be a live stepper handle; each output pointer may be NULL.
 */
LcesimStatus lcesim_stepper_shape(const LcesimStepper *st, size_t *components, size_t *points);

/**
 * Copies component `index` (row-major grid order) into `buf`, which holds `len` doubles.
 *
 * # Safety
 * `st` must be a live stepper handle and `buf` valid for `len` writes.
 */
LcesimStatus lcesim_stepper_copy_component(const LcesimStepper *st,
                                           size_t index,
                                           double *buf,
                                           size_t len);

/**
 * # Safety
 * `st` must be NULL or a handle not yet freed.
 */
void lcesim_stepper_free(LcesimStepper *st);

/**
 * Runs an acceptance suite. `passed` receives the verdict and `json` (if not NULL)
 * a report string to release with `lcesim_string_free`.
 *
 * # Safety
 * `name` must be a NUL-terminated string; `passed` a valid pointer.
 */
LcesimStatus lcesim_verify(const char *name, bool *passed, char **json);

/**
 * # Safety
 * `s` must be NULL or a string returned by this library.
 */
void lcesim_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LCESIM_H */
