#ifndef HALO_H
#define HALO_H

/* Generated by cbindgen; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes mirrored into the generated header.
 */
typedef enum HaloStatus {
  HALO_STATUS_OK = 0,
  HALO_STATUS_NULL_POINTER = 1,
  HALO_STATUS_INVALID_ARGUMENT = 2,
  HALO_STATUS_IO_ERROR = 3,
  HALO_STATUS_MALFORMED = 4,
  HALO_STATUS_INFEASIBLE = 5,
  HALO_STATUS_INTERNAL = 6,
} HaloStatus;

/**
 * Opaque quantized model.
 */
typedef struct HaloModel HaloModel;

/**
 * Opaque per-weight timing/energy profile.
 */
typedef struct HaloProfile HaloProfile;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the most recent error message for this thread into `buf`
 * (NUL-terminated, truncated to `len`). Returns the full message length,
 * not counting the terminator.
 *
 * # Safety
 * `buf` must point to `len` writable bytes, or be null (query mode).
 */
uintptr_t halo_last_error(char *buf, uintptr_t len);

/**
 * Loads a `halo-profile-v1` JSON profile.
 *
 * # Safety
 * `path` must be NUL-terminated; `out` must be a valid pointer.
 */
enum HaloStatus halo_profile_load(const char *path, struct HaloProfile **out);

/**
 * Builds the built-in synthetic tiered profile (useful for tests and
 * demos; no gate simulation required).
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum HaloStatus halo_profile_synthetic(struct HaloProfile **out);

/**
 * # Safety
 * `profile` must come from a `halo_profile_*` constructor, freed once.
 */
void halo_profile_free(struct HaloProfile *profile);

/**
 * Worst-case settling delay in picoseconds for one weight value; 0 if
 * `profile` is null.
 *
 * # Safety
 * `profile` must be a live handle or null.
 */
uint32_t halo_profile_worst_delay_ps(const struct HaloProfile *profile, int8_t weight);

/**
 * Mean switching energy for one weight value; NaN if `profile` is null.
 *
 * # Safety
 * `profile` must be a live handle or null.
 */
double halo_profile_switch_energy(const struct HaloProfile *profile, int8_t weight);

/**
 * Quantizes a row-major `rows x cols` weight/gradient pair into a model
 * with square tiles of edge `tile` and the given HIGH-class sensitivity
 * retention (e.g. 0.95).
 *
 * # Safety
 * `weights` and `gradients` must each point to `rows * cols` floats;
 * `profile` must be a live handle; `out` must be a valid pointer.
 */
enum HaloStatus halo_quantize(const float *weights,
                              const float *gradients,
                              uintptr_t rows,
                              uintptr_t cols,
                              uintptr_t tile,
                              double retention,
                              const struct HaloProfile *profile,
                              struct HaloModel **out);

/**
 * # Safety
 * `model` must come from a `halo_*` constructor, freed once.
 */
void halo_model_free(struct HaloModel *model);

/**
 * Parameter-weighted effective bit-width; NaN if `model` is null.
 *
 * # Safety
 * `model` must be a live handle or null.
 */
double halo_model_effective_bitwidth(const struct HaloModel *model);

/**
 * Nonzero count of the sparse outlier/salient overlay.
 *
 * # Safety
 * `model` must be a live handle or null.
 */
uintptr_t halo_model_overlay_nnz(const struct HaloModel *model);

/**
 * Fraction of tiles in the fast LOW class.
 *
 * # Safety
 * `model` must be a live handle or null.
 */
double halo_model_k_fraction(const struct HaloModel *model);

/**
 * Writes the model to `dir` in `halo-model-v1` layout.
 *
 * # Safety
 * `model` must be a live handle; `dir` must be NUL-terminated.
 */
enum HaloStatus halo_model_save(const struct HaloModel *model, const char *dir);

/**
 * Loads a `halo-model-v1` directory.
 *
 * # Safety
 * `dir` must be NUL-terminated; `out` must be a valid pointer.
 */
enum HaloStatus halo_model_load(const char *dir, struct HaloModel **out);

/**
 * Reconstructs the dequantized weights into `out` (row-major,
 * `rows * cols` floats).
 *
 * # Safety
 * `model` must be a live handle; `out` must point to `len` writable floats.
 */
enum HaloStatus halo_model_dequantize(const struct HaloModel *model, float *out, uintptr_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HALO_H */
