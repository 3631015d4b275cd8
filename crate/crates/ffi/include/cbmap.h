#ifndef CBMAP_H
#define CBMAP_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CbmapCenterInit {
  CBMAP_CENTER_INIT_PCA = 0,
  CBMAP_CENTER_INIT_RANDOM = 1,
} CbmapCenterInit;

typedef enum CbmapStatus {
  CBMAP_STATUS_OK = 0,
  CBMAP_STATUS_NULL_POINTER = 1,
  CBMAP_STATUS_INVALID_ARGUMENT = 2,
  CBMAP_STATUS_DIMENSION_MISMATCH = 3,
  CBMAP_STATUS_NON_FINITE = 4,
  CBMAP_STATUS_DEGENERATE = 5,
  CBMAP_STATUS_BUFFER_TOO_SMALL = 6,
  CBMAP_STATUS_PARSE_ERROR = 7,
  CBMAP_STATUS_VERSION_MISMATCH = 8,
  CBMAP_STATUS_IO_ERROR = 9,
  CBMAP_STATUS_PANIC = 10,
} CbmapStatus;

/**
 * Result of a fit: embedding, loss history, cluster labels and model.
 */
typedef struct CbmapFit CbmapFit;

/**
 * A fitted model that can embed new rows.
 */
typedef struct CbmapModel CbmapModel;

/**
 * Fit parameters. Obtain defaults from [`cbmap_fit_options_default`].
 */
typedef struct CbmapFitOptions {
  size_t n_clusters;
  size_t out_dim;
  size_t max_iter;
  double learning_rate;
  enum CbmapCenterInit center_init;
  double init_noise_std;
  bool standardize;
  uint64_t seed;
} CbmapFitOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL after a success.
 * The pointer stays valid until the next cbmap call on the same thread.
 */
const char *cbmap_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *cbmap_version(void);

struct CbmapFitOptions cbmap_fit_options_default(size_t n_clusters);

/**
 * Fit an embedding of the `n_rows x n_cols` row-major matrix `data`.
 *
 * # Safety
 * `data` must point to `n_rows * n_cols` doubles, `options` to a valid
 * options struct and `out` to writable storage for one handle pointer.
 */
enum CbmapStatus cbmap_fit(const double *data,
                           size_t n_rows,
                           size_t n_cols,
                           const struct CbmapFitOptions *options,
                           struct CbmapFit **out);

/**
 * # Safety
 * `fit` must be a handle from [`cbmap_fit`] or NULL.
 */
void cbmap_fit_free(struct CbmapFit *fit);

/**
 * Rows and columns of the embedding.
 *
 * # Safety
 * `fit` must be a live fit handle; `n_rows` and `n_cols` must be writable.
 */
enum CbmapStatus cbmap_fit_shape(const struct CbmapFit *fit, size_t *n_rows, size_t *n_cols);

/**
 * Copy the row-major embedding into `out` (at least `n_rows * n_cols` doubles).
 *
 * # Safety
 * `fit` must be a live fit handle; `out` must hold `out_len` doubles.
 */
enum CbmapStatus cbmap_fit_embedding(const struct CbmapFit *fit, double *out, size_t out_len);

/**
 * Number of recorded loss values (one per iteration).
 *
 * # Safety
 * `fit` must be a live fit handle or NULL (returns 0).
 */
size_t cbmap_fit_loss_history_len(const struct CbmapFit *fit);

/**
 * # Safety
 * `fit` must be a live fit handle; `out` must hold `out_len` doubles.
 */
enum CbmapStatus cbmap_fit_loss_history(const struct CbmapFit *fit, double *out, size_t out_len);

/**
 * Cluster label of each input row.
 *
 * # Safety
 * `fit` must be a live fit handle; `out` must hold `out_len` values.
 */
enum CbmapStatus cbmap_fit_labels(const struct CbmapFit *fit, size_t *out, size_t out_len);

/**
 * Copy the fitted model into a new model handle owned by the caller.
 *
 * # Safety
 * `fit` must be a live fit handle; `out` must be writable.
 */
enum CbmapStatus cbmap_fit_model(const struct CbmapFit *fit, struct CbmapModel **out);

/**
 * # Safety
 * `model` must be a model handle from this library or NULL.
 */
void cbmap_model_free(struct CbmapModel *model);

/**
 * # Safety
 * `model` must be a live model handle or NULL (returns 0).
 */
size_t cbmap_model_input_dim(const struct CbmapModel *model);

/**
 * # Safety
 * `model` must be a live model handle or NULL (returns 0).
 */
size_t cbmap_model_output_dim(const struct CbmapModel *model);

/**
 * # Safety
 * `model` must be a live model handle or NULL (returns 0).
 */
size_t cbmap_model_n_clusters(const struct CbmapModel *model);

/**
 * Embed `n_rows` new rows with the model's centers and bandwidths held fixed.
 * `out` receives `n_rows * output_dim` doubles, row-major.
 *
 * # Safety
 * `model` must be a live model handle, `data` must point to
 * `n_rows * n_cols` doubles and `out` must hold `out_len` doubles.
 */
enum CbmapStatus cbmap_model_transform(const struct CbmapModel *model,
                                       const double *data,
                                       size_t n_rows,
                                       size_t n_cols,
                                       size_t iters,
                                       uint64_t seed,
                                       double *out,
                                       size_t out_len);

/**
 * Serialize the model to a JSON string released with [`cbmap_string_free`].
 *
 * # Safety
 * `model` must be a live model handle; `out` must be writable.
 */
enum CbmapStatus cbmap_model_to_json(const struct CbmapModel *model, char **out);

/**
 * Parse a model from JSON.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
enum CbmapStatus cbmap_model_from_json(const char *json, struct CbmapModel **out);

/**
 * # Safety
 * `s` must be a string returned by this library or NULL.
 */
void cbmap_string_free(char *s);

/**
 * Global score of the `n x m` embedding `y` of the `n x d` data `x`.
 *
 * # Safety
 * `x` must point to `n * d` doubles, `y` to `n * m` doubles, `out` to one double.
 */
enum CbmapStatus cbmap_global_score(const double *x,
                                    const double *y,
                                    size_t n,
                                    size_t d,
                                    size_t m,
                                    double *out);

/**
 * Accuracy of a `k`-nearest-neighbour classifier on a seeded stratified
 * 80/20 split of the `n x m` embedding `y`.
 *
 * # Safety
 * `y` must point to `n * m` doubles, `labels` to `n` values, `out` to one double.
 */
enum CbmapStatus cbmap_knn_accuracy(const double *y,
                                    size_t n,
                                    size_t m,
                                    const size_t *labels,
                                    size_t k,
                                    uint64_t seed,
                                    double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CBMAP_H */
