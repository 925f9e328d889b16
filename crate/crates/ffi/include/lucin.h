#ifndef LUCIN_H
#define LUCIN_H

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum LucinStatus {
  LUCIN_STATUS_OK = 0,
  LUCIN_STATUS_NULL_ARGUMENT = 1,
  LUCIN_STATUS_INVALID_UTF8 = 2,
  LUCIN_STATUS_INVALID_REQUEST = 3,
  LUCIN_STATUS_THEORY_LOAD = 4,
  LUCIN_STATUS_PANIC = 5,
} LucinStatus;

/**
 * Opaque engine handle.
 */
typedef struct LucinEngine LucinEngine;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Creates an engine. `theory_dir` may be NULL for the built-in theories.
 *
 * # Safety
 * `theory_dir` must be NULL or a NUL-terminated string; `out` must be a
 * valid pointer.
 */
enum LucinStatus lucin_engine_new(const char *theory_dir, struct LucinEngine **out);

/**
 * Releases an engine. NULL is ignored.
 *
 * # Safety
 * `engine` must be NULL or a handle from [`lucin_engine_new`] not yet freed.
 */
void lucin_engine_free(struct LucinEngine *engine);

/**
 * Handles one JSON request and stores the JSON response envelope in
 * `out`. Protocol-level failures are reported inside the envelope; a
 * request that is not a JSON object yields `InvalidRequest` and still
 * produces an envelope.
 *
 * # Safety
 * `engine` must be a live handle, `request` a NUL-terminated string and
 * `out` a valid pointer.
 */
enum LucinStatus lucin_request(const struct LucinEngine *engine, const char *request, char **out);

/**
 * Parses a formula and stores its canonical printed form in `out`.
 *
 * # Safety
 * `src` must be a NUL-terminated string and `out` a valid pointer.
 */
enum LucinStatus lucin_parse_formula(const char *src, char **out);

/**
 * Releases a string returned by this library. NULL is ignored.
 *
 * # Safety
 * `s` must be NULL or a string from this library not yet freed.
 */
void lucin_string_free(char *s);

/**
 * Message for the last failed call on this thread; empty after success.
 * The pointer stays valid until the next call on the same thread.
 */
const char *lucin_last_error(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LUCIN_H */
