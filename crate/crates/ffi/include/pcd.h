#ifndef PCD_H
#define PCD_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

/**
 * Status codes. `Ok` is zero.
 */
typedef enum PcdStatus {
  PCD_STATUS_OK = 0,
  PCD_STATUS_NULL_POINTER = 1,
  PCD_STATUS_INVALID_UTF8 = 2,
  PCD_STATUS_INVALID_ARGUMENT = 3,
  PCD_STATUS_SCENE_FORMAT = 4,
  PCD_STATUS_DIMENSION_MISMATCH = 5,
  PCD_STATUS_IN_COLLISION = 6,
  PCD_STATUS_BUFFER_TOO_SMALL = 7,
  PCD_STATUS_NO_TRACE = 8,
  PCD_STATUS_INTERNAL = 9,
  PCD_STATUS_PANIC = 10,
} PcdStatus;

/**
 * The outcome of one planning query.
 */
typedef struct PcdPlanResult PcdPlanResult;

/**
 * A parsed scene.
 */
typedef struct PcdScene PcdScene;

typedef struct PcdConfig {
  /**
   * Collision probe spacing along local paths.
   */
  double resolution;
  uint64_t max_iterations;
  uint64_t seed;
  bool store_checkpath_samples;
  /**
   * Keep the event trace so it can be fetched with `pcd_result_trace_jsonl`.
   */
  bool record_trace;
} PcdConfig;

typedef struct PcdCounts {
  uint64_t splits;
  uint64_t samples;
  uint64_t probes;
} PcdCounts;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or NULL. Valid until
 * the next call into this library on the same thread.
 */
const char *pcd_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *pcd_version(void);

struct PcdConfig pcd_config_default(void);

/**
 * Parses a scene document. On success `*out` owns a new scene that must be
 * released with `pcd_scene_free`.
 *
 * # Safety
 * `json` must be NULL or a NUL-terminated string; `out` must be NULL or
 * writable.
 */
enum PcdStatus pcd_scene_from_json(const char *json, struct PcdScene **out);

/**
 * Dimension of `scene`, or 0 for NULL.
 *
 * # Safety
 * `scene` must be NULL or a live handle.
 */
uintptr_t pcd_scene_dimension(const struct PcdScene *scene);

/**
 * Writes whether `q` (of `len` coordinates) lies inside an obstacle.
 *
 * # Safety
 * `scene` must be a live handle, `q` must point to `len` doubles and `out`
 * must be writable.
 */
enum PcdStatus pcd_scene_collides(const struct PcdScene *scene,
                                  const double *q,
                                  uintptr_t len,
                                  bool *out);

/**
 * Releases a scene. NULL is ignored.
 *
 * # Safety
 * `scene` must be NULL or a handle from `pcd_scene_from_json` not yet freed.
 */
void pcd_scene_free(struct PcdScene *scene);

/**
 * Plans from `start` to `goal`, each of `len` coordinates. An exhausted
 * budget is not an error: check `pcd_result_solved`. On success `*out`
 * owns a result that must be released with `pcd_result_free`.
 *
 * # Safety
 * `scene` must be a live handle, `start` and `goal` must point to `len`
 * doubles and `config` must be NULL (defaults) or readable.
 */
enum PcdStatus pcd_plan(const struct PcdScene *scene,
                        const double *start,
                        const double *goal,
                        uintptr_t len,
                        const struct PcdConfig *config,
                        struct PcdPlanResult **out);

/**
 * # Safety
 * `result` must be NULL or a live handle.
 */
bool pcd_result_solved(const struct PcdPlanResult *result);

/**
 * Outer iterations run, which is the solve iteration for solved results.
 *
 * # Safety
 * `result` must be NULL or a live handle.
 */
uint64_t pcd_result_iterations(const struct PcdPlanResult *result);

/**
 * # Safety
 * `result` must be NULL or a live handle.
 */
struct PcdCounts pcd_result_counts(const struct PcdPlanResult *result);

/**
 * Number of path waypoints; 0 when unsolved.
 *
 * # Safety
 * `result` must be NULL or a live handle.
 */
uintptr_t pcd_result_waypoint_count(const struct PcdPlanResult *result);

/**
 * Copies the waypoints, row-major, into `buf` of `len` doubles. `len` must
 * be at least waypoint count times dimension.
 *
 * # Safety
 * `result` must be a live handle and `buf` must point to `len` writable
 * doubles.
 */
enum PcdStatus pcd_result_waypoints(const struct PcdPlanResult *result, double *buf, uintptr_t len);

/**
 * Writes the JSON-lines trace to `*out`; release it with `pcd_string_free`.
 * Fails with `NoTrace` unless the plan ran with `record_trace`.
 *
 * # Safety
 * `result` must be a live handle and `out` writable.
 */
enum PcdStatus pcd_result_trace_jsonl(const struct PcdPlanResult *result, char **out);

/**
 * Releases a plan result. NULL is ignored.
 *
 * # Safety
 * `result` must be NULL or a handle from `pcd_plan` not yet freed.
 */
void pcd_result_free(struct PcdPlanResult *result);

/**
 * Releases a string returned by this library. NULL is ignored.
 *
 * # Safety
 * `s` must be NULL or a string from this library not yet freed.
 */
void pcd_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PCD_H */
