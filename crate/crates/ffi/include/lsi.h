#ifndef LSI_H
#define LSI_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes. Values are stable.
typedef enum LsiStatus {
  LSI_STATUS_OK = 0,
  LSI_STATUS_NULL_POINTER = 1,
  LSI_STATUS_INVALID_UTF8 = 2,
  // Bad configuration, parameters, indices or input data.
  LSI_STATUS_INVALID_INPUT = 3,
  // File could not be read or written.
  LSI_STATUS_IO = 4,
  // File contents are corrupt or in the wrong format.
  LSI_STATUS_FORMAT = 5,
  // A computation failed to converge or hit a numerical guard.
  LSI_STATUS_NUMERIC = 6,
  // The request exceeds an enumeration limit.
  LSI_STATUS_REFUSED = 7,
  // Caller buffer is too small; the required length is reported.
  LSI_STATUS_BUFFER_TOO_SMALL = 8,
  // Unexpected internal failure.
  LSI_STATUS_INTERNAL = 9,
} LsiStatus;

typedef struct LsiConfig LsiConfig;

typedef struct LsiDataset LsiDataset;

typedef struct LsiImage LsiImage;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failure on this thread, or an empty string. The
// pointer stays valid until the next failing call on the same thread.
const char *lsi_last_error(void);

// Library version as a static NUL-terminated string.
const char *lsi_version(void);

// Loads a TOML run configuration from `path`.
//
// # Safety
// `path` must be a valid NUL-terminated string and `out` a valid pointer.
enum LsiStatus lsi_config_load(const char *path, struct LsiConfig **out);

// Parses a TOML run configuration from memory.
//
// # Safety
// `text` must be a valid NUL-terminated string and `out` a valid pointer.
enum LsiStatus lsi_config_parse(const char *text, struct LsiConfig **out);

// # Safety
// `cfg` must be null or a handle from `lsi_config_*` not yet freed.
void lsi_config_free(struct LsiConfig *cfg);

// Synthesizes the full-matrix dataset described by `cfg`.
//
// # Safety
// `cfg` must be a live handle and `out` a valid pointer.
enum LsiStatus lsi_simulate(const struct LsiConfig *cfg, struct LsiDataset **out);

// # Safety
// `path` must be a valid NUL-terminated string and `out` a valid pointer.
enum LsiStatus lsi_dataset_read(const char *path, struct LsiDataset **out);

// # Safety
// `ds` must be a live handle and `path` a valid NUL-terminated string.
enum LsiStatus lsi_dataset_write(const struct LsiDataset *ds, const char *path);

// Number of frequency bins, or 0 for a null handle.
//
// # Safety
// `ds` must be null or a live handle.
size_t lsi_dataset_bins(const struct LsiDataset *ds);

// Number of array elements, or 0 for a null handle.
//
// # Safety
// `ds` must be null or a live handle.
size_t lsi_dataset_elements(const struct LsiDataset *ds);

// Noise standard deviation recorded with the dataset, or NaN for null.
//
// # Safety
// `ds` must be null or a live handle.
double lsi_dataset_sigma(const struct LsiDataset *ds);

// Copies bin `bin` as interleaved (re, im) pairs in column-major order:
// `2 * M * M` doubles, column `p` holding transmission `p`.
//
// # Safety
// `ds` must be a live handle; `buf` must hold `len` doubles; `needed` may be null.
enum LsiStatus lsi_dataset_bin(const struct LsiDataset *ds,
                               size_t bin,
                               double *buf,
                               size_t len,
                               size_t *needed);

// # Safety
// `ds` must be null or a handle not yet freed.
void lsi_dataset_free(struct LsiDataset *ds);

// Runs the configured imaging method on `ds`.
//
// # Safety
// `cfg` and `ds` must be live handles and `out` a valid pointer.
enum LsiStatus lsi_reconstruct(const struct LsiConfig *cfg,
                               const struct LsiDataset *ds,
                               struct LsiImage **out);

// Grid dimensions of an image.
//
// # Safety
// `img` must be a live handle; `n_x` and `n_z` must be valid pointers.
enum LsiStatus lsi_image_size(const struct LsiImage *img, size_t *n_x, size_t *n_z);

// Copies pixel power in row-major order (depth rows, lateral fastest).
//
// # Safety
// `img` must be a live handle; `buf` must hold `len` doubles; `needed` may be null.
enum LsiStatus lsi_image_power(const struct LsiImage *img, double *buf, size_t len, size_t *needed);

// Text report of the reconstruction, owned by the image handle.
//
// # Safety
// `img` must be null or a live handle.
const char *lsi_image_report(const struct LsiImage *img);

// # Safety
// `img` must be null or a handle not yet freed.
void lsi_image_free(struct LsiImage *img);

// Analysis report for `cfg`, returned as a new string to be released with
// [`lsi_string_free`].
//
// # Safety
// `cfg` must be a live handle and `out` a valid pointer.
enum LsiStatus lsi_analyze(const struct LsiConfig *cfg, char **out);

// # Safety
// `s` must be null or a string returned by this library.
void lsi_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LSI_H */
