#ifndef GRASPKIT_H
#define GRASPKIT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible entry point.
 */
typedef enum GkStatus {
  GK_STATUS_OK = 0,
  GK_STATUS_NULL_ARGUMENT = 1,
  GK_STATUS_INVALID_ARGUMENT = 2,
  GK_STATUS_IO_ERROR = 3,
  GK_STATUS_RUNTIME_ERROR = 4,
} GkStatus;

/**
 * Opaque predictor handle: a loaded checkpoint ready for inference.
 */
typedef struct GkPredictor GkPredictor;

/**
 * A decoded planar grasp in image coordinates.
 */
typedef struct GkGrasp {
  /**
   * Center column, pixels.
   */
  double u;
  /**
   * Center row, pixels.
   */
  double v;
  /**
   * Grasp angle in [-pi/2, pi/2), radians.
   */
  double phi;
  /**
   * Gripper opening, pixels.
   */
  double width;
  /**
   * Quality in [0, 1].
   */
  double quality;
} GkGrasp;

/**
 * An oriented grasp rectangle (center, angle, opening, jaw size).
 */
typedef struct GkRect {
  double x;
  double y;
  double theta;
  double w;
  double h;
} GkRect;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Version string of the underlying toolkit; static storage, do not free.
 */
const char *gk_version(void);

/**
 * Message describing the most recent failure on this thread; valid until
 * the next failing call. Do not free.
 */
const char *gk_last_error_message(void);

/**
 * Loads a checkpoint directory. On success `*out` owns the predictor;
 * release it with [`gk_predictor_free`].
 *
 * # Safety
 * `checkpoint_dir` must be a valid NUL-terminated string and `out` a
 * valid pointer.
 */
enum GkStatus gk_predictor_load(const char *checkpoint_dir, struct GkPredictor **out);

/**
 * Releases a predictor created by [`gk_predictor_load`]. A null pointer
 * is a no-op.
 *
 * # Safety
 * `p` must have been produced by [`gk_predictor_load`] and not freed yet.
 */
void gk_predictor_free(struct GkPredictor *p);

/**
 * Number of input channels the loaded network expects (1, 3 or 4).
 *
 * # Safety
 * `p` must be a live predictor handle.
 */
int gk_predictor_input_channels(const struct GkPredictor *p);

/**
 * Square input size (pixels) the checkpoint was trained at. Inference
 * accepts any spatial size divisible by 4; this is the trained size.
 *
 * # Safety
 * `p` must be a live predictor handle.
 */
int gk_predictor_input_size(const struct GkPredictor *p);

/**
 * Runs inference on an already assembled, normalized input tensor laid
 * out as channel-major (C, H, W) f32, row-major within each channel.
 * Writes up to `capacity` grasps ordered by decreasing quality.
 *
 * # Safety
 * `data` must point to `channels * height * width` floats; `out_grasps`
 * must have room for `capacity` entries; `out_count` must be valid.
 */
enum GkStatus gk_predictor_predict_raw(const struct GkPredictor *p,
                                       const float *data,
                                       size_t channels,
                                       size_t height,
                                       size_t width,
                                       size_t top_k,
                                       struct GkGrasp *out_grasps,
                                       size_t capacity,
                                       size_t *out_count);

/**
 * Runs inference on a raw depth image in meters (H, W) row-major,
 * applying the toolkit's zero-mean depth normalization. Only valid for
 * depth-input (1 channel) checkpoints.
 *
 * # Safety
 * Pointer contracts as in [`gk_predictor_predict_raw`].
 */
enum GkStatus gk_predictor_predict_depth(const struct GkPredictor *p,
                                         const float *depth_m,
                                         size_t height,
                                         size_t width,
                                         size_t top_k,
                                         struct GkGrasp *out_grasps,
                                         size_t capacity,
                                         size_t *out_count);

/**
 * Jaccard index (intersection over union) of two oriented rectangles.
 *
 * # Safety
 * All pointers must be valid.
 */
enum GkStatus gk_rect_jaccard(const struct GkRect *a, const struct GkRect *b, double *out);

/**
 * 1 when the two grasp angles differ by less than `threshold_rad` under
 * pi-periodic identification, else 0.
 */
int gk_angle_match(double phi_pred, double phi_label, double threshold_rad);

/**
 * Rectangle-metric check of one predicted rectangle against a label set:
 * correct when the angle difference is below `angle_threshold_rad` and
 * the Jaccard overlap exceeds `jaccard_threshold` against the same label.
 *
 * # Safety
 * `labels` must point to `n_labels` rectangles; out pointers must be
 * valid.
 */
enum GkStatus gk_rect_is_correct(const struct GkRect *pred,
                                 const struct GkRect *labels,
                                 size_t n_labels,
                                 double angle_threshold_rad,
                                 double jaccard_threshold,
                                 int *out_matched,
                                 double *out_best_jaccard);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GRASPKIT_H */
