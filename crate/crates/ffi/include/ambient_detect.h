#ifndef AMBIENT_DETECT_H
#define AMBIENT_DETECT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Outcome of every call.
 */
typedef enum AbStatus {
  AB_STATUS_OK = 0,
  AB_STATUS_INVALID_ARGUMENT = 1,
  AB_STATUS_QUADRATURE_NON_CONVERGENCE = 2,
  AB_STATUS_SERIES_DIVERGENCE = 3,
  AB_STATUS_DETECTION_FAILURE = 4,
  AB_STATUS_TABLE_ERROR = 5,
  AB_STATUS_CONFIG_ERROR = 6,
  AB_STATUS_IO_ERROR = 7,
  AB_STATUS_NULL_POINTER = 8,
  AB_STATUS_BUFFER_TOO_SMALL = 9,
  AB_STATUS_PANIC = 10,
} AbStatus;

/**
 * Detector selector; functions take it as a `uint32_t` code.
 */
typedef enum AbDetector {
  AB_DETECTOR_DIRECT = 0,
  AB_DETECTOR_INDIRECT = 1,
  AB_DETECTOR_ENERGY = 2,
  AB_DETECTOR_DIRECT_SIC = 3,
} AbDetector;

/**
 * Detector bank: likelihood context, thresholds and tables for one
 * parameter set.
 */
typedef struct AbDetectorBank AbDetectorBank;

/**
 * Parsed sweep configuration.
 */
typedef struct AbSweepConfig AbSweepConfig;

/**
 * Channel and signal statistics, all variances linear.
 */
typedef struct AbParams {
  double sigma_s2;
  double sigma_st2;
  double sigma_tr2;
  double sigma_sr2;
  double sigma_w2;
  double alpha;
  uint32_t n_samples;
} AbParams;

typedef struct AbThresholds {
  double theta1;
  double theta2;
  double theta3;
} AbThresholds;

/**
 * Table settings for [`ab_bank_new`]. `fallback` is 0 for the per-detector
 * default, 1 for direct quadrature, 2 for the Bessel form.
 */
typedef struct AbLutSettings {
  double delta;
  double z_max;
  uint32_t fallback;
  double inner_steps;
} AbLutSettings;

typedef struct AbVerdict {
  double statistic;
  double threshold;
  uint8_t decided_bit;
} AbVerdict;

/**
 * One row of a sweep result.
 */
typedef struct AbBerEstimate {
  enum AbDetector detector;
  double sweep_value;
  uint64_t trials;
  uint64_t errors_0to1;
  uint64_t errors_1to0;
  uint64_t erased;
  uint64_t counted_0;
  uint64_t counted_1;
  double ber;
  double std_err;
} AbBerEstimate;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copy the message of the last failure on this thread into `buf`,
 * NUL-terminated. Returns the length the message needs, excluding the
 * terminator; when that is `>= len` the copy is truncated.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t ab_last_error(char *buf, size_t len);

/**
 * Fill `out` with the default parameters (all variances 1, α = 1, N = 10).
 *
 * # Safety
 * `out` must be null or valid for writes.
 */
enum AbStatus ab_params_default(struct AbParams *out);

/**
 * `ln I_L(z; a, b)` and its estimated absolute error.
 *
 * # Safety
 * `out_log` must be valid for writes; `out_abs_err` may be null.
 */
enum AbStatus ab_log_il(double z,
                        double a,
                        double b,
                        uint32_t l,
                        double tol,
                        double *out_log,
                        double *out_abs_err);

/**
 * `K_n(x)`, the modified Bessel function of the second kind.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum AbStatus ab_bessel_k(uint32_t order, double x, double *out);

/**
 * `E_n(x)`, the generalized exponential integral.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum AbStatus ab_gen_exp_integral(uint32_t n, double x, double *out);

/**
 * θ₁*, θ₂*, θ₃* for `params`.
 *
 * # Safety
 * `params` must be valid for reads and `out` for writes.
 */
enum AbStatus ab_thresholds(const struct AbParams *params, struct AbThresholds *out);

/**
 * Simulate trial `index` of stream `master_seed`: a random bit, one
 * channel draw and the received energy with and without the direct path.
 *
 * # Safety
 * `params` must be valid for reads; the out pointers for writes.
 */
enum AbStatus ab_simulate_trial(const struct AbParams *params,
                                uint64_t master_seed,
                                uint64_t index,
                                uint8_t *out_bit,
                                double *out_z,
                                double *out_z_cancelled);

/**
 * Build a detector bank. `lut` may be null for plain quadrature.
 *
 * # Safety
 * `params` must be valid for reads, `lut` null or valid, `out` valid for
 * writes. Release the bank with [`ab_bank_free`].
 */
enum AbStatus ab_bank_new(const struct AbParams *params,
                          double quad_tol,
                          const struct AbLutSettings *lut,
                          struct AbDetectorBank **out);

/**
 * Release a bank. Null is ignored.
 *
 * # Safety
 * `bank` must come from [`ab_bank_new`] and not be used afterwards.
 */
void ab_bank_free(struct AbDetectorBank *bank);

/**
 * The bank's thresholds.
 *
 * # Safety
 * `bank` must be a live handle and `out` valid for writes.
 */
enum AbStatus ab_bank_thresholds(const struct AbDetectorBank *bank, struct AbThresholds *out);

/**
 * Statistic and decision of `detector` for energy `z`. `z_cancelled` is
 * only read by the interference-free detector.
 *
 * # Safety
 * `bank` must be a live handle and `out` valid for writes.
 */
enum AbStatus ab_bank_evaluate(const struct AbDetectorBank *bank,
                               uint32_t detector,
                               double z,
                               double z_cancelled,
                               struct AbVerdict *out);

/**
 * `ln p(y | b)` for a received vector of energy `z`; `hypothesis` is the
 * bit, `sic` selects the model with the direct path removed.
 *
 * # Safety
 * `bank` must be a live handle and `out` valid for writes.
 */
enum AbStatus ab_bank_log_pdf_y(const struct AbDetectorBank *bank,
                                uint8_t hypothesis,
                                bool sic,
                                double z,
                                double *out);

/**
 * Parse a `key = value` sweep configuration.
 *
 * # Safety
 * `text` must be a NUL-terminated string and `out` valid for writes.
 * Release the result with [`ab_config_free`].
 */
enum AbStatus ab_config_parse(const char *text, struct AbSweepConfig **out);

/**
 * Release a configuration. Null is ignored.
 *
 * # Safety
 * `config` must come from [`ab_config_parse`] and not be used afterwards.
 */
void ab_config_free(struct AbSweepConfig *config);

/**
 * Number of rows [`ab_estimate_ber`] produces: sweep points times detectors.
 *
 * # Safety
 * `config` must be a live handle and `out` valid for writes.
 */
enum AbStatus ab_config_rows(const struct AbSweepConfig *config, size_t *out);

/**
 * Run the sweep, writing up to `capacity` rows to `rows` and the row
 * count to `written`. Fails with `BufferTooSmall` before simulating when
 * `capacity` is short.
 *
 * # Safety
 * `config` must be a live handle, `rows` valid for `capacity` writes and
 * `written` valid for writes.
 */
enum AbStatus ab_estimate_ber(const struct AbSweepConfig *config,
                              struct AbBerEstimate *rows,
                              size_t capacity,
                              size_t *written);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* AMBIENT_DETECT_H */
