#ifndef STITCHNORM_H
#define STITCHNORM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SnBackend {
  SN_BACKEND_PCA = 0,
  SN_BACKEND_JET = 1,
  SN_BACKEND_NET = 2,
} SnBackend;

typedef enum SnStatus {
  SN_STATUS_OK = 0,
  SN_STATUS_NULL_POINTER = 1,
  SN_STATUS_INVALID_ARGUMENT = 2,
  SN_STATUS_CONFIG = 3,
  SN_STATUS_DATA = 4,
  SN_STATUS_DEGENERATE = 5,
  SN_STATUS_NUMERIC = 6,
  SN_STATUS_IO = 7,
  SN_STATUS_WEIGHTS = 8,
  SN_STATUS_PANIC = 9,
} SnStatus;

/**
 * A point cloud with optional reference normals.
 */
typedef struct SnCloud SnCloud;

/**
 * Loaded network weights.
 */
typedef struct SnNetwork SnNetwork;

/**
 * Stitched normals and per-point selection data.
 */
typedef struct SnResult SnResult;

/**
 * Pipeline settings; start from [`sn_estimate_options_default`].
 */
typedef struct SnEstimateOptions {
  size_t patch_size;
  /**
   * 0 derives the count from `overlap`.
   */
  size_t patch_count;
  double overlap;
  uint64_t seed;
  enum SnBackend backend;
  double sigma_ratio;
  /**
   * 0 keeps the value stored with the weights.
   */
  size_t k_graph;
  bool naive_stitch;
} SnEstimateOptions;

typedef struct SnMetrics {
  double rmse_deg;
  double pgp5;
  double pgp10;
  size_t n_evaluated;
} SnMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version, a static NUL-terminated string.
 */
const char *sn_version(void);

/**
 * Message of the last failed call on this thread; empty if none. Valid until
 * the next failing call on the same thread.
 */
const char *sn_last_error(void);

/**
 * Copies `n` points from `xyz` (`3n` doubles, interleaved).
 */
enum SnStatus sn_cloud_new(const double *xyz, size_t n, struct SnCloud **out);

/**
 * Attaches `n` unit reference normals (`3n` doubles); `n` must equal the
 * cloud size.
 */
enum SnStatus sn_cloud_set_normals(struct SnCloud *cloud, const double *normals, size_t n);

size_t sn_cloud_len(const struct SnCloud *cloud);

void sn_cloud_free(struct SnCloud *cloud);

/**
 * Loads an STNW weights file.
 */
enum SnStatus sn_network_load(const char *path, struct SnNetwork **out);

void sn_network_free(struct SnNetwork *net);

struct SnEstimateOptions sn_estimate_options_default(void);

/**
 * Runs the full pipeline. `net` is required for the net backend and ignored
 * otherwise; `options` may be null for the defaults.
 */
enum SnStatus sn_estimate(const struct SnCloud *cloud,
                          const struct SnEstimateOptions *options,
                          const struct SnNetwork *net,
                          struct SnResult **out);

size_t sn_result_len(const struct SnResult *result);

/**
 * Copies `3·len` doubles of stitched normals into `out`; `capacity` counts
 * points.
 */
enum SnStatus sn_result_normals(const struct SnResult *result, double *out, size_t capacity);

/**
 * Winning candidate weight per point (0 for uncovered points).
 */
enum SnStatus sn_result_winner_weights(const struct SnResult *result, double *out, size_t capacity);

/**
 * Candidate count `m_i` per point.
 */
enum SnStatus sn_result_candidate_counts(const struct SnResult *result,
                                         size_t *out,
                                         size_t capacity);

/**
 * Number of points filled by the fallback estimator.
 */
size_t sn_result_uncovered_len(const struct SnResult *result);

/**
 * Ids of the points filled by the fallback estimator, ascending.
 */
enum SnStatus sn_result_uncovered(const struct SnResult *result, size_t *out, size_t capacity);

void sn_result_free(struct SnResult *result);

/**
 * Unoriented angle metrics of `n` predicted normals against `n` reference
 * normals (both `3n` doubles). `subset` may be null to use every point.
 */
enum SnStatus sn_evaluate(const double *pred,
                          const double *gt,
                          size_t n,
                          const size_t *subset,
                          size_t subset_len,
                          struct SnMetrics *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* STITCHNORM_H */
