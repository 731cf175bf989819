#ifndef MULTIMAP_H
#define MULTIMAP_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum MmStatus {
  MM_STATUS_OK = 0,
  MM_STATUS_INVALID_ARGUMENT = 1,
  MM_STATUS_OUT_OF_BOUNDS = 2,
  MM_STATUS_DIMENSION_MISMATCH = 3,
  MM_STATUS_CONFIG = 4,
  MM_STATUS_NUMERICAL = 5,
  MM_STATUS_NOT_FOUND = 6,
  MM_STATUS_VERSION = 7,
  MM_STATUS_CHECKSUM = 8,
  MM_STATUS_VALIDATION = 9,
  MM_STATUS_IO = 10,
  MM_STATUS_JSON = 11,
  MM_STATUS_NULL_POINTER = 12,
  MM_STATUS_PANIC = 13,
} MmStatus;

typedef struct MmConfig MmConfig;

typedef struct MmImageSet MmImageSet;

typedef struct MmMaps MmMaps;

typedef struct MmMask MmMask;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the last error message of this thread into `buf` (NUL-terminated,
// truncated to `len`). Returns the full message length without the NUL.
//
// # Safety
// `buf` must be null or point to `len` writable bytes.
size_t mm_last_error_message(char *buf, size_t len);

// # Safety
// `out` must be a valid pointer.
enum MmStatus mm_config_new(struct MmConfig **out);

// Parses a JSON configuration; omitted sections keep their defaults.
//
// # Safety
// `json` must be a NUL-terminated string and `out` a valid pointer.
enum MmStatus mm_config_from_json(const char *json, struct MmConfig **out);

// # Safety
// `cfg` must be null or a handle from this library, not yet freed.
void mm_config_free(struct MmConfig *cfg);

// Simulates the phantom and scan described by `cfg`.
//
// # Safety
// `cfg` must be a live handle and `out` a valid pointer.
enum MmStatus mm_simulate(const struct MmConfig *cfg, struct MmImageSet **out);

// # Safety
// `dir` must be a NUL-terminated string and `out` a valid pointer.
enum MmStatus mm_imageset_read(const char *dir, struct MmImageSet **out);

// # Safety
// `set` must be a live handle and `dir` a NUL-terminated string.
enum MmStatus mm_imageset_write(const struct MmImageSet *set, const char *dir);

// # Safety
// `set` must be a live handle; `width` and `height` valid pointers.
enum MmStatus mm_imageset_size(const struct MmImageSet *set, size_t *width, size_t *height);

// Copies image `index` (1..=11) of `segment` (1 or 2) as interleaved
// real/imaginary float pairs into `buf`, which holds `len` floats.
//
// # Safety
// `set` must be a live handle and `buf` point to `len` writable floats.
enum MmStatus mm_imageset_copy(const struct MmImageSet *set,
                               size_t segment,
                               size_t index,
                               float *buf,
                               size_t len);

// # Safety
// `set` must be null or a handle from this library, not yet freed.
void mm_imageset_free(struct MmImageSet *set);

// Thresholds and cleans the mean image using the mask settings of `cfg`.
//
// # Safety
// `set` and `cfg` must be live handles and `out` a valid pointer.
enum MmStatus mm_mask_make(const struct MmImageSet *set,
                           const struct MmConfig *cfg,
                           struct MmMask **out);

// # Safety
// `path` must be a NUL-terminated string and `out` a valid pointer.
enum MmStatus mm_mask_read(const char *file, struct MmMask **out);

// # Safety
// `mask` and `cfg` must be live handles and `file` a NUL-terminated string.
enum MmStatus mm_mask_write(const struct MmMask *mask,
                            const struct MmConfig *cfg,
                            const char *file);

// Number of pixels inside the mask, or 0 for a null handle.
//
// # Safety
// `mask` must be null or a live handle.
size_t mm_mask_count(const struct MmMask *mask);

// # Safety
// `mask` must be null or a handle from this library, not yet freed.
void mm_mask_free(struct MmMask *mask);

// Runs the full estimation. The B1 table is computed from `cfg`.
//
// # Safety
// All handles must be live and `out` a valid pointer.
enum MmStatus mm_estimate(const struct MmImageSet *set,
                          const struct MmMask *mask,
                          const struct MmConfig *cfg,
                          struct MmMaps **out);

// # Safety
// `dir` must be a NUL-terminated string and `out` a valid pointer.
enum MmStatus mm_maps_read(const char *dir, struct MmMaps **out);

// # Safety
// `maps` must be a live handle and `dir` a NUL-terminated string.
enum MmStatus mm_maps_write(const struct MmMaps *maps, const char *dir);

// Copies the map called `name` (for example `"t1"` or `"fat_fraction"`).
// `values` receives `len` doubles; `valid`, if not null, `len` 0/1 bytes.
//
// # Safety
// `maps` must be a live handle, `name` a NUL-terminated string, `values`
// point to `len` writable doubles and `valid` be null or point to `len` bytes.
enum MmStatus mm_maps_get(const struct MmMaps *maps,
                          const char *name,
                          double *values,
                          uint8_t *valid,
                          size_t len);

// # Safety
// `maps` must be null or a handle from this library, not yet freed.
void mm_maps_free(struct MmMaps *maps);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MULTIMAP_H */
