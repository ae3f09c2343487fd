#ifndef CVQKD_H
#define CVQKD_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CvqkdStatus {
  CVQKD_STATUS_OK = 0,
  CVQKD_STATUS_NULL_POINTER = 1,
  CVQKD_STATUS_INVALID_UTF8 = 2,
  /**
   * Unknown key, unparsable value or inconsistent configuration.
   */
  CVQKD_STATUS_CONFIG = 3,
  /**
   * A value outside its physical domain.
   */
  CVQKD_STATUS_INVALID_PARAMETER = 4,
  /**
   * Unphysical covariance or no positive key rate.
   */
  CVQKD_STATUS_UNPHYSICAL = 5,
  /**
   * Too few samples, degenerate pilots or mismatched inputs.
   */
  CVQKD_STATUS_INSUFFICIENT_DATA = 6,
  CVQKD_STATUS_IO = 7,
  CVQKD_STATUS_PANIC = 8,
} CvqkdStatus;

/**
 * Experiment configuration.
 */
typedef struct CvqkdConfig CvqkdConfig;

/**
 * Completed experiment report.
 */
typedef struct CvqkdReport CvqkdReport;

/**
 * Headline numbers of a report.
 */
typedef struct CvqkdSummary {
  uint64_t pulses;
  uint64_t bits;
  uint64_t bit_errors;
  double q_factor;
  double ber_analytic;
  double symbol_error_rate;
  double delta_hat;
  double t_hat;
  double xi_hat;
  double key_rate_per_pulse;
  double key_rate_bps;
  double data_rate_bps;
} CvqkdSummary;

/**
 * Analytic key rate at a configuration's nominal channel.
 */
typedef struct CvqkdKeyRate {
  double i_ab;
  double chi_be;
  double key_rate_per_pulse;
  double key_rate_bps;
} CvqkdKeyRate;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null if none.
 * The pointer stays valid until the next failing call on the same thread.
 */
const char *cvqkd_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *cvqkd_version(void);

/**
 * New configuration holding the defaults.
 */
struct CvqkdConfig *cvqkd_config_new_default(void);

/**
 * Parses `key = value` text on top of the defaults.
 *
 * # Safety
 * `text` must be a NUL-terminated string and `out` a valid pointer.
 */
enum CvqkdStatus cvqkd_config_from_text(const char *text, struct CvqkdConfig **out);

/**
 * Sets one key from its text form, as in a config file.
 *
 * # Safety
 * `cfg` must come from this library; `key` and `value` must be NUL-terminated.
 */
enum CvqkdStatus cvqkd_config_set(struct CvqkdConfig *cfg, const char *key, const char *value);

/**
 * Configuration as `key = value` text; free with [`cvqkd_string_free`].
 *
 * # Safety
 * `cfg` must come from this library and `out` be a valid pointer.
 */
enum CvqkdStatus cvqkd_config_to_text(const struct CvqkdConfig *cfg, char **out);

/**
 * # Safety
 * `cfg` must come from this library and not be used afterwards. Null is a no-op.
 */
void cvqkd_config_free(struct CvqkdConfig *cfg);

/**
 * Runs the full simulation. Blocks until done; uses the configured worker count.
 *
 * # Safety
 * `cfg` must come from this library and `out` be a valid pointer.
 */
enum CvqkdStatus cvqkd_run_experiment(const struct CvqkdConfig *cfg, struct CvqkdReport **out);

/**
 * Canonical JSON of the report (the bytes the CLI writes); free with [`cvqkd_string_free`].
 *
 * # Safety
 * `report` must come from this library and `out` be a valid pointer.
 */
enum CvqkdStatus cvqkd_report_json(const struct CvqkdReport *report, char **out);

/**
 * # Safety
 * `report` must come from this library and `out` be a valid pointer.
 */
enum CvqkdStatus cvqkd_report_summary(const struct CvqkdReport *report, struct CvqkdSummary *out);

/**
 * # Safety
 * `report` must come from this library and not be used afterwards. Null is a no-op.
 */
void cvqkd_report_free(struct CvqkdReport *report);

/**
 * Analytic key rate at the configuration's nominal T, ξ and detector, no simulation.
 *
 * # Safety
 * `cfg` must come from this library and `out` be a valid pointer.
 */
enum CvqkdStatus cvqkd_keyrate(const struct CvqkdConfig *cfg, struct CvqkdKeyRate *out);

/**
 * Gaussian bit error rate ½·erfc(Q/√2).
 */
double cvqkd_ber_from_q(double q);

/**
 * # Safety
 * `s` must be a string returned by this library, or null.
 */
void cvqkd_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CVQKD_H */
