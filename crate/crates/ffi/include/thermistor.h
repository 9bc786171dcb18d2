#ifndef THERMISTOR_H
#define THERMISTOR_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes of every fallible call.
 */
typedef enum thermistor_status {
  THERMISTOR_OK = 0,
  /**
   * A required pointer argument was null.
   */
  THERMISTOR_NULL_ARGUMENT = 1,
  /**
   * A string argument was not valid UTF-8.
   */
  THERMISTOR_INVALID_UTF8 = 2,
  /**
   * The configuration failed to parse or validate.
   */
  THERMISTOR_INVALID_CONFIG = 3,
  /**
   * The solver failed (details via thermistor_last_error).
   */
  THERMISTOR_SOLVER_FAILURE = 4,
  /**
   * Filesystem failure while writing or reading a record.
   */
  THERMISTOR_IO_FAILURE = 5,
  /**
   * A scalar argument was outside its admissible range.
   */
  THERMISTOR_OUT_OF_RANGE = 6,
} thermistor_status;

/**
 * Opaque parsed configuration.
 */
typedef struct thermistor_config thermistor_config;

/**
 * Opaque completed run: the pasted solution plus its check verdicts.
 */
typedef struct thermistor_run thermistor_run;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the most recent failure on this thread. Borrowed; valid until
 * the next failing call on the same thread.
 */
const char *thermistor_last_error(void);

/**
 * Static version string of the underlying solver crate.
 */
const char *thermistor_version(void);

/**
 * Parse and validate a configuration file.
 *
 * # Safety
 * `path` must be a valid nul-terminated string; `out` must be a valid
 * pointer. On success `*out` owns a new handle.
 */
enum thermistor_status thermistor_config_load(const char *path, struct thermistor_config **out);

/**
 * Parse and validate a configuration from an in-memory string.
 *
 * # Safety
 * As `thermistor_config_load`.
 */
enum thermistor_status thermistor_config_parse(const char *text, struct thermistor_config **out);

/**
 * Release a configuration handle (null is a no-op).
 *
 * # Safety
 * `cfg` must be null or a pointer previously returned by a config
 * constructor and not yet freed.
 */
void thermistor_config_free(struct thermistor_config *cfg);

/**
 * The contraction threshold τ* of a configuration.
 *
 * # Safety
 * `cfg` and `out` must be valid pointers.
 */
enum thermistor_status thermistor_tau_star(const struct thermistor_config *cfg, double *out);

/**
 * Execute the configured run; the handle carries the trace, the diagnostic
 * rows and the standard check verdicts.
 *
 * # Safety
 * `cfg` and `out` must be valid pointers. On success `*out` owns a new
 * handle.
 */
enum thermistor_status thermistor_run_execute(const struct thermistor_config *cfg,
                                              struct thermistor_run **out);

/**
 * Release a run handle (null is a no-op).
 *
 * # Safety
 * `run` must be null or a pointer previously returned by
 * `thermistor_run_execute` and not yet freed.
 */
void thermistor_run_free(struct thermistor_run *run);

/**
 * Number of time nodes (including t = 0).
 *
 * # Safety
 * `run` must be a valid handle.
 */
size_t thermistor_run_num_nodes(const struct thermistor_run *run);

/**
 * Read one node of the voltage trace; out-pointers may be null to skip.
 *
 * # Safety
 * `run` must be a valid handle; non-null out-pointers must be valid.
 */
enum thermistor_status thermistor_run_node(const struct thermistor_run *run,
                                           size_t node,
                                           double *t,
                                           double *v,
                                           double *v_prime,
                                           double *i_r);

/**
 * sup_t |V(t)| over the run.
 *
 * # Safety
 * `run` must be a valid handle.
 */
double thermistor_run_sup_voltage(const struct thermistor_run *run);

/**
 * min over all nodes and cells of the temperature.
 *
 * # Safety
 * `run` must be a valid handle.
 */
double thermistor_run_min_theta(const struct thermistor_run *run);

/**
 * 1 iff every a priori estimate check passed.
 *
 * # Safety
 * `run` must be a valid handle.
 */
int thermistor_run_checks_passed(const struct thermistor_run *run);

/**
 * Write the run record (CSV time series, diagnostics, checks, report,
 * snapshots) into `dir`.
 *
 * # Safety
 * `run` must be a valid handle, `dir` a valid nul-terminated string.
 */
enum thermistor_status thermistor_run_write(const struct thermistor_run *run, const char *dir);

/**
 * The conjugate exponent pair (p, q) of the fourth estimate for
 * α ∈ (2/3, 1).
 *
 * # Safety
 * Non-null out-pointers must be valid.
 */
enum thermistor_status thermistor_exponent_pair(double alpha, double *p, double *q);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* THERMISTOR_H */
