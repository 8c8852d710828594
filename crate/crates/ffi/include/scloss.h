#ifndef SCLOSS_H
#define SCLOSS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SclStatus {
  SCL_STATUS_OK = 0,
  SCL_STATUS_NULL_POINTER = 1,
  /**
   * Bad dimensions, probabilities outside [0, 1], non-binary labels.
   */
  SCL_STATUS_INVALID_INPUT = 2,
  SCL_STATUS_INVALID_CONFIG = 3,
  /**
   * The grid has no adjacent pixel pairs.
   */
  SCL_STATUS_DEGENERATE_GEOMETRY = 4,
  SCL_STATUS_INTERNAL = 5,
} SclStatus;

typedef enum SclSingleResponse {
  SCL_SINGLE_RESPONSE_BCE = 0,
  SCL_SINGLE_RESPONSE_MSE = 1,
  SCL_SINGLE_RESPONSE_L1 = 2,
  SCL_SINGLE_RESPONSE_CROSS_ENTROPY = 3,
} SclSingleResponse;

typedef enum SclRegularizer {
  SCL_REGULARIZER_GAUSSIAN = 0,
  SCL_REGULARIZER_DISTANCE = 1,
  SCL_REGULARIZER_CONSTANT = 2,
} SclRegularizer;

typedef enum SclReduction {
  SCL_REDUCTION_MEAN = 0,
  SCL_REDUCTION_SUM = 1,
} SclReduction;

/**
 * Opaque loss configuration.
 */
typedef struct SclConfig SclConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Default configuration: K = 2, alpha = 1, BCE, Gaussian, mean reduction.
 * Release with [`scl_config_free`].
 */
struct SclConfig *scl_config_new(void);

/**
 * # Safety
 * `cfg` must be null or a handle from [`scl_config_new`] not yet freed.
 */
void scl_config_free(struct SclConfig *cfg);

/**
 * Sets the level count and resets level weights to `1, 1/2, ...`.
 */
enum SclStatus scl_config_set_k_max(struct SclConfig *cfg, size_t k_max);

/**
 * Replaces the level weights; `k_max` becomes `len`.
 *
 * # Safety
 * `weights` must be valid for `len` reads.
 */
enum SclStatus scl_config_set_level_weights(struct SclConfig *cfg,
                                            const double *weights,
                                            size_t len);

enum SclStatus scl_config_set_alpha(struct SclConfig *cfg, double alpha);

enum SclStatus scl_config_set_epsilon(struct SclConfig *cfg, double epsilon);

/**
 * `kind` is an `SclSingleResponse` value.
 */
enum SclStatus scl_config_set_single_response(struct SclConfig *cfg, uint32_t kind);

/**
 * `kind` is an `SclRegularizer` value.
 */
enum SclStatus scl_config_set_regularizer(struct SclConfig *cfg, uint32_t kind);

/**
 * `kind` is an `SclReduction` value.
 */
enum SclStatus scl_config_set_reduction(struct SclConfig *cfg, uint32_t kind);

size_t scl_config_k_max(const struct SclConfig *cfg);

/**
 * Loss of one image. `out_loss_map` and `out_attention_map` may be null;
 * otherwise they receive `height * width` values.
 *
 * # Safety
 * `pred` and `labels` must be valid for `height * width` reads, and every
 * non-null output for the matching number of writes.
 */
enum SclStatus scl_image_loss(const struct SclConfig *cfg,
                              size_t height,
                              size_t width,
                              const double *pred,
                              const uint32_t *labels,
                              double *out_total,
                              double *out_loss_map,
                              double *out_attention_map);

/**
 * Gradient of the loss with respect to the probabilities.
 *
 * # Safety
 * As [`scl_image_loss`]; `out_grad` must be valid for `height * width` writes.
 */
enum SclStatus scl_grad_wrt_probs(const struct SclConfig *cfg,
                                  size_t height,
                                  size_t width,
                                  const double *pred,
                                  const uint32_t *labels,
                                  double *out_grad);

/**
 * Gradient with respect to logits `z`, where `p = sigmoid(z)`.
 *
 * # Safety
 * As [`scl_grad_wrt_probs`], with `logits` in place of `pred`.
 */
enum SclStatus scl_grad_wrt_logits(const struct SclConfig *cfg,
                                   size_t height,
                                   size_t width,
                                   const double *logits,
                                   const uint32_t *labels,
                                   double *out_grad);

/**
 * Message of the last failed call on this thread, or null. The pointer is
 * valid until the next call into this library on the same thread.
 */
const char *scl_last_error_message(void);

/**
 * Library version as a static nul-terminated string.
 */
const char *scl_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SCLOSS_H */
