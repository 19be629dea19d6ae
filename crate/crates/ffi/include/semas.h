#ifndef SEMAS_H
#define SEMAS_H

/* Generated by cbindgen. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SemasStatus {
  SEMAS_STATUS_OK = 0,
  SEMAS_STATUS_NULL_POINTER = 1,
  SEMAS_STATUS_INVALID_ARGUMENT = 2,
  SEMAS_STATUS_INVALID_UTF8 = 3,
  SEMAS_STATUS_CONFIG = 4,
  SEMAS_STATUS_DATA = 5,
  SEMAS_STATUS_DETECT = 6,
  SEMAS_STATUS_CONSENSUS = 7,
  SEMAS_STATUS_EVOLVE = 8,
  SEMAS_STATUS_FEDERATE = 9,
  SEMAS_STATUS_RUNTIME = 10,
  SEMAS_STATUS_PANIC = 11,
} SemasStatus;

/**
 * Generated dataset.
 */
typedef struct SemasDataset SemasDataset;

/**
 * Fitted five-member detector bank.
 */
typedef struct SemasDetector SemasDetector;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Valid until
 * the next call on the same thread.
 */
const char *semas_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *semas_version(void);

/**
 * Consensus score `w1*a1 + w2*a2` and the alert decision against `tau`.
 *
 * # Safety
 * `out_score` and `out_alert` must be valid for writes.
 */
enum SemasStatus semas_fuse(double a1,
                            double a2,
                            double w1,
                            double w2,
                            double tau,
                            double *out_score,
                            bool *out_alert);

/**
 * Policy reward with the default weights.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum SemasStatus semas_reward(double f1,
                              double delta_p,
                              double delta_r,
                              double latency_ms,
                              double *out);

/**
 * Sample-weighted parameter average. `params` is row-major
 * `n_agents x dim`; `out` receives `dim` values.
 *
 * # Safety
 * `n_samples` must hold `n_agents` values, `params` `n_agents * dim`
 * values and `out` room for `dim` values.
 */
enum SemasStatus semas_federated_aggregate(const uint64_t *n_samples,
                                           const double *params,
                                           size_t n_agents,
                                           size_t dim,
                                           double *out);

/**
 * Generates a synthetic dataset from a named profile (`boiler`, `wind`).
 * `n_samples` of 0 keeps the profile size.
 *
 * # Safety
 * `profile` must be a NUL-terminated string and `out` valid for writes.
 */
enum SemasStatus semas_dataset_generate(const char *profile,
                                        uint64_t seed,
                                        size_t n_samples,
                                        struct SemasDataset **out);

/**
 * # Safety
 * `ds` must come from [`semas_dataset_generate`] or be null.
 */
size_t semas_dataset_len(const struct SemasDataset *ds);

/**
 * # Safety
 * `ds` must come from [`semas_dataset_generate`] or be null.
 */
size_t semas_dataset_n_features(const struct SemasDataset *ds);

/**
 * Copies row `index` into `features` (room for `capacity` values) and its
 * label into `label`.
 *
 * # Safety
 * `ds` must be a live handle; `features` must hold `capacity` values.
 */
enum SemasStatus semas_dataset_row(const struct SemasDataset *ds,
                                   size_t index,
                                   double *features,
                                   size_t capacity,
                                   bool *label);

/**
 * # Safety
 * `ds` must come from [`semas_dataset_generate`] and not be used again.
 */
void semas_dataset_free(struct SemasDataset *ds);

/**
 * Fits the detector bank on `n_rows x n_features` row-major training data.
 *
 * # Safety
 * `rows` must hold `n_rows * n_features` values and `out` be valid for
 * writes.
 */
enum SemasStatus semas_detector_fit(const double *rows,
                                    size_t n_rows,
                                    size_t n_features,
                                    uint64_t seed,
                                    struct SemasDetector **out);

/**
 * Raw member scores (5 values) and the vote fraction a2 for one sample.
 *
 * # Safety
 * `det` must be a live handle, `x` must hold `n_features` values and
 * `out_scores` room for 5.
 */
enum SemasStatus semas_detector_score(const struct SemasDetector *det,
                                      const double *x,
                                      size_t n_features,
                                      double *out_scores,
                                      double *out_a2);

/**
 * # Safety
 * `det` must come from [`semas_detector_fit`] and not be used again.
 */
void semas_detector_free(struct SemasDetector *det);

/**
 * Runs an experiment from a JSON run configuration and returns the
 * summary as JSON. Free the result with [`semas_string_free`].
 *
 * # Safety
 * `config_json` must be a NUL-terminated string and `out` valid for
 * writes.
 */
enum SemasStatus semas_run_experiment_json(const char *config_json, char **out);

/**
 * # Safety
 * `s` must come from this library and not be used again.
 */
void semas_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SEMAS_H */
