#ifndef GASLIGHT_H
#define GASLIGHT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum GslStatus {
  GSL_STATUS_OK = 0,
  GSL_STATUS_NULL_POINTER = 1,
  GSL_STATUS_INVALID_ARGUMENT = 2,
  GSL_STATUS_IO = 3,
  GSL_STATUS_FORMAT = 4,
  GSL_STATUS_PREDICTOR = 5,
  GSL_STATUS_DIVERGED = 6,
  GSL_STATUS_PANIC = 7,
  GSL_STATUS_INTERNAL = 8,
} GslStatus;

// Linear RGB float image.
typedef struct GslImage GslImage;

// Gaussian splat scene.
typedef struct GslScene GslScene;

typedef struct GslExpansion {
  uint32_t darker_steps;
  uint32_t brighter_steps;
  bool truncated;
} GslExpansion;

// Image comparison results; see `gsl_compare`.
typedef struct GslMetrics {
  double mse;
  double psnr;
  // Mean RGB angle in degrees.
  double angular_error;
  double pu21_psnr;
  // Factor applied to the prediction before comparing (1 without alignment).
  double alignment_scale;
} GslMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *gsl_version(void);

// Copies the last error message of this thread into `buf` (NUL-terminated,
// truncated to `len`). Returns the full message length without the NUL, or 0
// if no call has failed on this thread.
size_t gsl_last_error(char *buf, size_t len);

// New `width` x `height` image from interleaved RGB floats, or zeros if
// `data` is null.
enum GslStatus gsl_image_new(size_t width, size_t height, const float *data, struct GslImage **out);

// Reads a `.hdr` or `.pfm` file.
enum GslStatus gsl_image_read(const char *path, struct GslImage **out);

// Writes `.hdr` or `.pfm` by extension.
enum GslStatus gsl_image_write(const struct GslImage *img, const char *path);

enum GslStatus gsl_image_dims(const struct GslImage *img, size_t *width, size_t *height);

// Copies the interleaved RGB samples into `dst`, which must hold `3 * w * h` floats.
enum GslStatus gsl_image_copy_data(const struct GslImage *img, float *dst, size_t len);

void gsl_image_free(struct GslImage *img);

// Tonemaps `gt` to gamma-2.2 LDR, expands it with the ground-truth oracle, and
// merges the stack. `expansion` may be null.
enum GslStatus gsl_oracle_roundtrip(const struct GslImage *gt,
                                    uint32_t max_steps,
                                    double step_ev,
                                    struct GslImage **out,
                                    struct GslExpansion *expansion);

// Compares `pred` with `gt` in display (`linear` false) or linear space,
// optionally after exposure alignment.
enum GslStatus gsl_compare(const struct GslImage *pred,
                           const struct GslImage *gt,
                           bool align,
                           bool linear,
                           struct GslMetrics *out);

// Renders the default sphere-and-plane scene lit by `env` as a 90 degree
// partial environment facing +Z.
enum GslStatus gsl_relight(const struct GslImage *env,
                           size_t width,
                           size_t height,
                           size_t samples,
                           uint64_t seed,
                           struct GslImage **out);

enum GslStatus gsl_scene_read_ply(const char *path, struct GslScene **out);

enum GslStatus gsl_scene_write_ply(const struct GslScene *scene, const char *path);

// Number of gaussians, or 0 for a null scene.
size_t gsl_scene_len(const struct GslScene *scene);

void gsl_scene_free(struct GslScene *scene);

// Equirectangular environment map of `width` x `width / 2` seen from (x, y, z).
enum GslStatus gsl_scene_bake(const struct GslScene *scene,
                              double x,
                              double y,
                              double z,
                              size_t width,
                              struct GslImage **out);

// Indices of gaussians brighter than `threshold` in some direction. Writes at
// most `capacity` indices and the total count to `count`; `indices` may be
// null to query the count.
enum GslStatus gsl_scene_emitters(const struct GslScene *scene,
                                  double threshold,
                                  size_t *indices,
                                  size_t capacity,
                                  size_t *count);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GASLIGHT_H */
