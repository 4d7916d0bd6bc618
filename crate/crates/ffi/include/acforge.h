#ifndef ACFORGE_H
#define ACFORGE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes shared by every function.
 */
typedef enum {
  ACF_STATUS_OK = 0,
  ACF_STATUS_NULL_ARGUMENT = 1,
  ACF_STATUS_INVALID_UTF8 = 2,
  ACF_STATUS_INVALID_ARGUMENT = 3,
  ACF_STATUS_NOT_FOUND = 4,
  ACF_STATUS_ALREADY_EXISTS = 5,
  ACF_STATUS_STILL_REFERENCED = 6,
  ACF_STATUS_LOCKED = 7,
  ACF_STATUS_INVALID_DATA = 8,
  ACF_STATUS_VALIDATION_FAILED = 9,
  ACF_STATUS_IO = 10,
  ACF_STATUS_PANIC = 11,
} AcfStatus;

/**
 * Opened case directory.
 */
typedef struct AcfCase AcfCase;

/**
 * Fitted isolation forest.
 */
typedef struct AcfForest AcfForest;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *acf_last_error(void);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not be freed twice.
 */
void acf_string_free(char *s);

/**
 * Creates (if needed) and opens a case directory.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a writable pointer.
 */
AcfStatus acf_case_init(const char *path, AcfCase **out);

/**
 * Opens an existing case directory.
 *
 * # Safety
 * See [`acf_case_init`].
 */
AcfStatus acf_case_open(const char *path, AcfCase **out);

/**
 * # Safety
 * `case` must come from [`acf_case_open`]/[`acf_case_init`] or be null.
 */
void acf_case_free(AcfCase *case_);

/**
 * Pins the clock to `epoch` when `fixed` is true, otherwise uses the system clock.
 *
 * # Safety
 * `case` must be a live handle.
 */
AcfStatus acf_case_set_clock(AcfCase *case_, bool fixed, int64_t epoch);

/**
 * Creates an element of `kind` (claim, measure, blueprint) from a JSON
 * object of fields and saves it.
 *
 * # Safety
 * `case` must be a live handle; strings NUL-terminated.
 */
AcfStatus acf_case_create(const AcfCase *case_, const char *kind, const char *fields_json);

/**
 * Loads the stored record `id` as canonical JSON.
 *
 * # Safety
 * `case` must be a live handle; `out_json` writable.
 */
AcfStatus acf_case_load_json(const AcfCase *case_, const char *id, char **out_json);

/**
 * # Safety
 * `case` must be a live handle.
 */
AcfStatus acf_case_delete(const AcfCase *case_, const char *id);

/**
 * Validates the case below `root`. Findings are returned as a JSON array
 * and the number of error-severity findings through `out_errors`.
 *
 * # Safety
 * `case` must be a live handle; output pointers writable.
 */
AcfStatus acf_case_validate(const AcfCase *case_,
                            const char *root,
                            char **out_findings_json,
                            size_t *out_errors);

/**
 * Exports the case below `root` in `mode` (`evidence_only` or `subtree`).
 *
 * # Safety
 * `case` must be a live handle; `out_json` writable.
 */
AcfStatus acf_case_export(const AcfCase *case_,
                          const char *root,
                          const char *mode,
                          char **out_json);

/**
 * Formats `epoch` as `YYYY-MM-DD HH:MM:SS` at `offset_minutes` from UTC.
 *
 * # Safety
 * `out` must be writable.
 */
AcfStatus acf_format_timestamp(int64_t epoch, int32_t offset_minutes, char **out);

/**
 * Confident joint of `n` labels against an `n x k` row-major probability
 * matrix. Writes `k * k` counts (row = given label) and the number of rows
 * that reached no class threshold.
 *
 * # Safety
 * `labels` holds `n` values, `probs` `n * k`, `out_counts` room for `k * k`.
 */
AcfStatus acf_confident_joint(const size_t *labels,
                              const double *probs,
                              size_t n,
                              size_t k,
                              uint64_t *out_counts,
                              size_t *out_uncounted);

/**
 * Label-issue candidates as a JSON array of
 * `{index, given, suggested, confidence}`, most confident first.
 *
 * # Safety
 * As for [`acf_confident_joint`]; `out_json` writable.
 */
AcfStatus acf_label_issues(const size_t *labels,
                           const double *probs,
                           size_t n,
                           size_t k,
                           char **out_json);

/**
 * Fits an isolation forest on `n x d` row-major data.
 *
 * # Safety
 * `rows` holds `n * d` values; `out` writable.
 */
AcfStatus acf_forest_fit(const double *rows,
                         size_t n,
                         size_t d,
                         size_t n_trees,
                         size_t psi,
                         uint64_t seed,
                         AcfForest **out);

/**
 * Scores `n x d` rows; writes `n` anomaly scores in (0, 1).
 *
 * # Safety
 * `forest` must be live; `rows` holds `n * d` values, `out_scores` room for `n`.
 */
AcfStatus acf_forest_score(const AcfForest *forest,
                           const double *rows,
                           size_t n,
                           size_t d,
                           double *out_scores);

/**
 * # Safety
 * `forest` must come from [`acf_forest_fit`] or be null.
 */
void acf_forest_free(AcfForest *forest);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ACFORGE_H */
