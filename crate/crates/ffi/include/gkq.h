#ifndef GKQ_H
#define GKQ_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Number of values passed to [`gkq_score`]: seven ratings then height in cm.
#define GKQ_PROFILE_LEN 8

// Result of every fallible call.
typedef enum GkqStatus {
  GKQ_STATUS_OK = 0,
  GKQ_STATUS_NULL_POINTER = 1,
  GKQ_STATUS_INVALID_UTF8 = 2,
  GKQ_STATUS_INVALID_JSON = 3,
  GKQ_STATUS_INVALID_PROFILE = 4,
  GKQ_STATUS_PARSE_ERROR = 5,
  GKQ_STATUS_INCOMPATIBLE_RULEBASE = 6,
  GKQ_STATUS_INTERNAL = 7,
  GKQ_STATUS_PANIC = 8,
} GkqStatus;

// Quality levels, worst to best.
typedef enum GkqLevel {
  GKQ_LEVEL_AWFUL = 0,
  GKQ_LEVEL_RELATIVELY_AWFUL = 1,
  GKQ_LEVEL_BAD = 2,
  GKQ_LEVEL_RELATIVELY_BAD = 3,
  GKQ_LEVEL_ORDINARY = 4,
  GKQ_LEVEL_RELATIVELY_GOOD = 5,
  GKQ_LEVEL_GOOD = 6,
  GKQ_LEVEL_ALMOST_EXCELLENT = 7,
  GKQ_LEVEL_EXCELLENT = 8,
} GkqLevel;

// Opaque scoring engine.
typedef struct GkqEngine GkqEngine;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Engine with the default calibration and the generated 256-rule base.
// Returns null only if construction panicked.
struct GkqEngine *gkq_engine_new_default(void);

// Engine scoring with the rule base in `frb_text` (NUL-terminated UTF-8).
//
// # Safety
// `frb_text` must be null or a valid NUL-terminated string; `out` must be
// null or point to writable storage for one pointer.
enum GkqStatus gkq_engine_from_frb(const char *frb_text, struct GkqEngine **out);

// Releases an engine. Null is ignored.
//
// # Safety
// `engine` must be null or a handle from this library not yet freed.
void gkq_engine_free(struct GkqEngine *engine);

// Scores eight numbers: exit from goal, flexibility, overhead dominance,
// establishing connection, courage, leadership, person-to-person battles
// (each 0 to 10), then height in cm (100 to 220).
//
// # Safety
// `values` must point to [`GKQ_PROFILE_LEN`] doubles. `out_score` and
// `out_level` may each be null.
enum GkqStatus gkq_score(const struct GkqEngine *engine,
                         const double *values,
                         double *out_score,
                         enum GkqLevel *out_level);

// Evaluates a profile JSON object and writes the report JSON to `out`.
// The report is the same document the HTTP service returns.
//
// # Safety
// `profile_json` must be null or a valid NUL-terminated string; `out` must
// point to writable storage for one pointer.
enum GkqStatus gkq_evaluate_json(const struct GkqEngine *engine,
                                 const char *profile_json,
                                 char **out);

// Writes the engine's rule base in canonical `.frb` form to `out`.
//
// # Safety
// `out` must point to writable storage for one pointer.
enum GkqStatus gkq_rulebase_text(const struct GkqEngine *engine, char **out);

// Message for the last failed call on this thread, or null. Valid until the
// next call into this library on the same thread.
const char *gkq_last_error(void);

// Releases a string returned by this library. Null is ignored.
//
// # Safety
// `s` must be null or a string from this library not yet freed.
void gkq_string_free(char *s);

// Display name of a level ("Relatively good"), or null if out of range.
// The string is static.
const char *gkq_level_name(int32_t level);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GKQ_H */
