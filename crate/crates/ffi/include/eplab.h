#ifndef EPLAB_H
#define EPLAB_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum EplabStatus {
  EPLAB_STATUS_OK = 0,
  EPLAB_STATUS_NULL_POINTER = 1,
  EPLAB_STATUS_INVALID_UTF8 = 2,
  EPLAB_STATUS_CONFIG = 3,
  EPLAB_STATUS_PRECONDITION = 4,
  EPLAB_STATUS_NUMERIC = 5,
  EPLAB_STATUS_SOLVER = 6,
  EPLAB_STATUS_UNSUPPORTED = 7,
  EPLAB_STATUS_IO = 8,
  EPLAB_STATUS_BUFFER_TOO_SMALL = 9,
  EPLAB_STATUS_PANIC = 10,
} EplabStatus;

typedef enum EplabTermination {
  EPLAB_TERMINATION_COMPLETED = 0,
  EPLAB_TERMINATION_BLOWUP_DETECTED = 1,
  EPLAB_TERMINATION_SOLVER_FAILURE = 2,
} EplabTermination;

/**
 * A finished run.
 */
typedef struct EplabRun EplabRun;

/**
 * A scenario built from a preset or config text.
 */
typedef struct EplabScenario EplabScenario;

/**
 * Criteria on the initial data.
 */
typedef struct EplabCriteria {
  double h0;
  /**
   * `exp(V_-^{-1}(H(0)))`
   */
  double exp_v_minus_inv_h0;
  /**
   * `2 min rho0`
   */
  double two_rho0_min;
  bool pressureless_holds;
  bool liu_holds;
} EplabCriteria;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or NULL. Valid until the
 * next call into the library on the same thread.
 */
const char *eplab_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *eplab_version(void);

/**
 * # Safety
 * `name` must be a NUL-terminated string and `out` a valid pointer.
 */
enum EplabStatus eplab_scenario_from_preset(const char *name, struct EplabScenario **out);

/**
 * Parses `key = value` config text. Environment overrides are not applied.
 *
 * # Safety
 * `text` must be a NUL-terminated string and `out` a valid pointer.
 */
enum EplabStatus eplab_scenario_from_config(const char *text, struct EplabScenario **out);

/**
 * Sets one config key. On failure the scenario is left unchanged.
 *
 * # Safety
 * `scenario` must come from this library; `key` and `value` must be NUL-terminated.
 */
enum EplabStatus eplab_scenario_set(struct EplabScenario *scenario,
                                    const char *key,
                                    const char *value);

/**
 * # Safety
 * `scenario` must come from this library and `out` be valid.
 */
enum EplabStatus eplab_scenario_grid_size(const struct EplabScenario *scenario, size_t *out);

/**
 * # Safety
 * `scenario` must come from this library or be NULL; it must not be used afterwards.
 */
void eplab_scenario_free(struct EplabScenario *scenario);

/**
 * # Safety
 * `scenario` must come from this library and `out` be valid.
 */
enum EplabStatus eplab_criteria(const struct EplabScenario *scenario, struct EplabCriteria *out);

/**
 * `V_-^{-1}(h)` for `h >= 0`.
 *
 * # Safety
 * `out` must be valid.
 */
enum EplabStatus eplab_v_minus_inverse(double h, double *out);

/**
 * `V_+^{-1}(h)` for `h >= 0`.
 *
 * # Safety
 * `out` must be valid.
 */
enum EplabStatus eplab_v_plus_inverse(double h, double *out);

/**
 * Runs the scenario. Solver breakdown is reported through the run's
 * termination, not the status.
 *
 * # Safety
 * `scenario` must come from this library and `out` be valid.
 */
enum EplabStatus eplab_run(const struct EplabScenario *scenario, struct EplabRun **out);

/**
 * # Safety
 * `run` must come from this library or be NULL; it must not be used afterwards.
 */
void eplab_run_free(struct EplabRun *run);

/**
 * # Safety
 * `run` must come from this library and `out` be valid.
 */
enum EplabStatus eplab_run_termination(const struct EplabRun *run, enum EplabTermination *out);

/**
 * Estimated blow-up time; `*has_value` is false when none was detected.
 *
 * # Safety
 * `run` must come from this library; `out` and `has_value` must be valid.
 */
enum EplabStatus eplab_run_t_star(const struct EplabRun *run, double *out, bool *has_value);

/**
 * # Safety
 * `run` must come from this library and `out` be valid.
 */
enum EplabStatus eplab_run_final_time(const struct EplabRun *run, double *out);

/**
 * Copies the last valid `rho`, `u` and `phi` into caller buffers of `len`
 * doubles each. Any buffer may be NULL to skip it.
 *
 * # Safety
 * `run` must come from this library; non-NULL buffers must hold `len` doubles.
 */
enum EplabStatus eplab_run_final_fields(const struct EplabRun *run,
                                        double *rho,
                                        double *u,
                                        double *phi,
                                        size_t len);

/**
 * Writes the key-value run summary, NUL-terminated, into `buf`. `*needed`
 * receives the required capacity including the NUL. Pass `buf = NULL` to query it.
 *
 * # Safety
 * `run` must come from this library; `buf` must hold `capacity` bytes when not NULL.
 */
enum EplabStatus eplab_run_summary(const struct EplabRun *run,
                                   char *buf,
                                   size_t capacity,
                                   size_t *needed);

/**
 * Writes diagnostics, probe, snapshots and summary under `dir`.
 *
 * # Safety
 * `run` must come from this library and `dir` be NUL-terminated.
 */
enum EplabStatus eplab_run_write_artifacts(const struct EplabRun *run, const char *dir);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* EPLAB_H */
