#ifndef IWASAWA_FFI_H
#define IWASAWA_FFI_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum IwStatus {
  IW_STATUS_OK = 0,
  IW_STATUS_NULL_POINTER = 1,
  IW_STATUS_INVALID_UTF8 = 2,
  IW_STATUS_PARSE = 3,
  IW_STATUS_MODEL = 4,
  IW_STATUS_PRECISION = 5,
  IW_STATUS_MISMATCH = 6,
  IW_STATUS_CONFIG = 7,
  IW_STATUS_OTHER = 8,
  IW_STATUS_PANIC = 9,
} IwStatus;

/**
 * An element of a truncated Iwasawa algebra.
 */
typedef struct IwSeries IwSeries;

/**
 * A truncation `Λ/F_W` of a validated group model.
 */
typedef struct IwTrunc IwTrunc;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *iw_last_error(void);

/**
 * Release a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed already.
 */
void iw_string_free(char *s);

/**
 * Build the model and base truncation described by a JSON config.
 *
 * # Safety
 * `config_json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum IwStatus iw_trunc_from_config(const char *config_json, struct IwTrunc **out);

/**
 * Number of basis monomials of the truncation.
 *
 * # Safety
 * `t` must be a live handle or null.
 */
enum IwStatus iw_trunc_size(const struct IwTrunc *t, size_t *out);

/**
 * # Safety
 * `t` must come from [`iw_trunc_from_config`] and not be used afterwards.
 */
void iw_trunc_free(struct IwTrunc *t);

/**
 * Parse a series literal such as `"1 + 2*b1*b2^3"`.
 *
 * # Safety
 * `t` must be a live handle, `text` NUL-terminated, `out` valid.
 */
enum IwStatus iw_series_parse(const struct IwTrunc *t, const char *text, struct IwSeries **out);

/**
 * Product `a * b` in the truncated algebra.
 *
 * # Safety
 * `a`, `b` must be live handles, `out` valid.
 */
enum IwStatus iw_series_mul(const struct IwSeries *a,
                            const struct IwSeries *b,
                            struct IwSeries **out);

/**
 * Sum `a + b`.
 *
 * # Safety
 * `a`, `b` must be live handles, `out` valid.
 */
enum IwStatus iw_series_add(const struct IwSeries *a,
                            const struct IwSeries *b,
                            struct IwSeries **out);

/**
 * Filtration value in units of `1/e`. `resolved` is set to 0 when the series
 * vanishes modulo `F_W`, in which case `value` is the lower bound `W`.
 *
 * # Safety
 * `s` must be a live handle; `value` and `resolved` valid pointers.
 */
enum IwStatus iw_series_w_val(const struct IwSeries *s, int64_t *value, int32_t *resolved);

/**
 * Render a series; free the result with [`iw_string_free`].
 *
 * # Safety
 * `s` must be a live handle, `out` valid.
 */
enum IwStatus iw_series_to_string(const struct IwSeries *s, char **out);

/**
 * # Safety
 * `s` must come from this library and not be used afterwards.
 */
void iw_series_free(struct IwSeries *s);

/**
 * Run every task of a JSON config. The report is written as JSON lines to
 * `out_jsonl`; `any_failed` is set to 1 if some record failed.
 *
 * # Safety
 * `config_json` must be NUL-terminated; `out_jsonl` and `any_failed` valid.
 */
enum IwStatus iw_run_config(const char *config_json, char **out_jsonl, int32_t *any_failed);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* IWASAWA_FFI_H */
