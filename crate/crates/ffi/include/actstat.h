#ifndef ACTSTAT_H
#define ACTSTAT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes.
 */
typedef enum ActStatus {
  ACT_STATUS_OK = 0,
  ACT_STATUS_NULL_POINTER = 1,
  ACT_STATUS_INVALID_ARGUMENT = 2,
  ACT_STATUS_IO = 3,
  ACT_STATUS_FORMAT = 4,
  ACT_STATUS_SHAPE = 5,
  ACT_STATUS_VALIDATION = 6,
  ACT_STATUS_LIMIT = 7,
  ACT_STATUS_NUMERIC = 8,
  ACT_STATUS_PANIC = 9,
} ActStatus;

/**
 * Element type of a tensor.
 */
typedef enum ActDtype {
  ACT_DTYPE_REAL32 = 1,
  ACT_DTYPE_BINARY8 = 2,
} ActDtype;

typedef enum ActEstimator {
  ACT_ESTIMATOR_COUNTS = 0,
  ACT_ESTIMATOR_CHAIN_LOGISTIC = 1,
  ACT_ESTIMATOR_CHAIN_STUMPS = 2,
} ActEstimator;

/**
 * Opaque binary rows × neurons matrix.
 */
typedef struct ActBinary ActBinary;

/**
 * Opaque validated run (manifest plus dumps).
 */
typedef struct ActRun ActRun;

/**
 * Opaque activation tensor.
 */
typedef struct ActTensor ActTensor;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or NULL. Valid until the
 * next failing call on the same thread.
 */
const char *actstat_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *actstat_version(void);

/**
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum ActStatus actstat_tensor_read(const char *path, struct ActTensor **out);

/**
 * # Safety
 * `t` must come from this library; `path` must be NUL-terminated.
 */
enum ActStatus actstat_tensor_write(const struct ActTensor *t, const char *path);

/**
 * Copy `len` row-major floats with shape `dims[0..ndim]` into a new tensor.
 *
 * # Safety
 * `dims` must hold `ndim` values and `data` `len` values.
 */
enum ActStatus actstat_tensor_from_f32(const size_t *dims,
                                       size_t ndim,
                                       const float *data,
                                       size_t len,
                                       struct ActTensor **out);

/**
 * Copy `len` row-major 0/1 bytes with shape `dims[0..ndim]` into a new tensor.
 *
 * # Safety
 * `dims` must hold `ndim` values and `data` `len` values.
 */
enum ActStatus actstat_tensor_from_binary(const size_t *dims,
                                          size_t ndim,
                                          const uint8_t *data,
                                          size_t len,
                                          struct ActTensor **out);

/**
 * # Safety
 * `t` must come from this library or be NULL.
 */
void actstat_tensor_free(struct ActTensor *t);

/**
 * # Safety
 * `t` must come from this library; `out` must be valid.
 */
enum ActStatus actstat_tensor_dtype(const struct ActTensor *t, enum ActDtype *out);

/**
 * Writes the rank to `ndim` and, when `dims` is non-NULL, up to `capacity`
 * dimensions into `dims`.
 *
 * # Safety
 * `dims` must have room for `capacity` values when non-NULL.
 */
enum ActStatus actstat_tensor_shape(const struct ActTensor *t,
                                    size_t *ndim,
                                    size_t *dims,
                                    size_t capacity);

/**
 * Binarize a tensor (4-D dumps are flattened to pixel rows first). With
 * `pre_activation` nonzero the θ(x ≥ 0) rule is used, otherwise x > 0.
 * Binary tensors are taken as-is.
 *
 * # Safety
 * `t` must come from this library; `out` must be valid.
 */
enum ActStatus actstat_binarize(const struct ActTensor *t,
                                bool pre_activation,
                                struct ActBinary **out);

/**
 * # Safety
 * `b` must come from this library or be NULL.
 */
void actstat_binary_free(struct ActBinary *b);

/**
 * # Safety
 * Pointers must be valid.
 */
enum ActStatus actstat_binary_shape(const struct ActBinary *b, size_t *rows, size_t *cols);

/**
 * Fraction of active bits.
 *
 * # Safety
 * Pointers must be valid.
 */
enum ActStatus actstat_linearity(const struct ActBinary *b, double *out);

/**
 * Joint entropy in bits.
 *
 * # Safety
 * Pointers must be valid.
 */
enum ActStatus actstat_complexity(const struct ActBinary *b,
                                  enum ActEstimator method,
                                  size_t folds,
                                  uint64_t seed,
                                  double *out);

/**
 * Normalized total correlation; `degenerate` is set when every neuron is frozen.
 *
 * # Safety
 * Pointers must be valid; `degenerate` may be NULL.
 */
enum ActStatus actstat_total_correlation(const struct ActBinary *b,
                                         enum ActEstimator method,
                                         size_t folds,
                                         uint64_t seed,
                                         double *out,
                                         bool *degenerate);

/**
 * PCA effective dimension of a real tensor (4-D flattened to pixel rows).
 *
 * # Safety
 * Pointers must be valid; `degenerate` may be NULL.
 */
enum ActStatus actstat_effective_dimension(const struct ActTensor *t,
                                           double *out,
                                           bool *degenerate);

/**
 * Load and validate a manifest and the headers of all its dumps.
 *
 * # Safety
 * `manifest` must be NUL-terminated; `out` must be valid.
 */
enum ActStatus actstat_run_load(const char *manifest, struct ActRun **out);

/**
 * # Safety
 * `r` must come from this library or be NULL.
 */
void actstat_run_free(struct ActRun *r);

/**
 * # Safety
 * Pointers must be valid.
 */
enum ActStatus actstat_run_layer_count(const struct ActRun *r, size_t *out);

/**
 * Compute per-layer observables for every captured epoch and write
 * `trajectory.csv` and `depth_profile.csv` into `out_dir`. `max_rows` 0 means
 * no row cap.
 *
 * # Safety
 * `r` must come from this library; `out_dir` must be NUL-terminated.
 */
enum ActStatus actstat_run_analyze(const struct ActRun *r,
                                   enum ActEstimator method,
                                   size_t folds,
                                   size_t max_rows,
                                   uint64_t seed,
                                   const char *out_dir);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ACTSTAT_H */
