#ifndef HEALTHSCOPE_H
#define HEALTHSCOPE_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum HsStatus {
  HS_STATUS_OK = 0,
  HS_STATUS_NULL_POINTER = 1,
  HS_STATUS_INVALID_UTF8 = 2,
  HS_STATUS_INVALID_ARGUMENT = 3,
  HS_STATUS_SPEC = 4,
  HS_STATUS_PAIRING = 5,
  HS_STATUS_CONFIG = 6,
  HS_STATUS_NOT_FOUND = 7,
  HS_STATUS_INFEASIBLE = 8,
  HS_STATUS_INSUFFICIENT_DATA = 9,
  HS_STATUS_EMPTY_WINDOW = 10,
  HS_STATUS_PARSE = 11,
  HS_STATUS_IO = 12,
  HS_STATUS_PANIC = 13,
} HsStatus;

/*
 Opaque result of one simulated scenario run end to end.
 */
typedef struct HsPipelineResult HsPipelineResult;

/*
 Opaque cluster model.
 */
typedef struct HsTopology HsTopology;

/*
 Localization and attribution counts of a pipeline run.
 */
typedef struct HsScore {
  uint32_t true_positives;
  uint32_t false_negatives;
  uint32_t false_positives;
  uint32_t failure_correct;
  uint32_t failure_incorrect;
  uint32_t overload_correct;
  uint32_t overload_incorrect;
  double recall;
  uint32_t windows;
} HsScore;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message for the last failed call on this thread, or null. The pointer is
 valid until the next failing call on the same thread.
 */
const char *hs_last_error_message(void);

/*
 Library version as a static string.
 */
const char *hs_version(void);

/*
 Releases a string returned by this library. Null is ignored.

 # Safety
 `s` must come from this library and not have been freed.
 */
void hs_string_free(char *s);

/*
 Builds a preset topology (`minimal`, `ci`, `full`) with the given seed.

 # Safety
 `name` must be a NUL-terminated string; `out` must be writable.
 */
enum HsStatus hs_topology_preset(const char *name, uint64_t seed, struct HsTopology **out);

/*
 Builds a topology from a TOML topology spec.

 # Safety
 `toml_text` must be a NUL-terminated string; `out` must be writable.
 */
enum HsStatus hs_topology_from_toml(const char *toml_text, struct HsTopology **out);

/*
 Number of components of every kind, clients included.

 # Safety
 `topo` must be a live handle; `out` must be writable.
 */
enum HsStatus hs_topology_component_count(const struct HsTopology *topo, size_t *out);

/*
 Topology document as JSON. Free the result with [`hs_string_free`].

 # Safety
 `topo` must be a live handle; `out` must be writable.
 */
enum HsStatus hs_topology_to_json(const struct HsTopology *topo, char **out);

/*
 Exact `k`-identifiability of the storage components when every client
 probes. On a negative verdict `witness` (if non-null) receives a JSON
 description of the blocking failure set; otherwise it is set to null.

 # Safety
 `topo` must be a live handle; `identifiable` must be writable; `witness`
 may be null.
 */
enum HsStatus hs_topology_check_identifiability(const struct HsTopology *topo,
                                                size_t k,
                                                bool *identifiable,
                                                char **witness);

/*
 # Safety
 `topo` must come from this library and not have been freed. Null is
 ignored.
 */
void hs_topology_free(struct HsTopology *topo);

/*
 Generates, simulates, infers, diagnoses and scores one scenario described
 by a TOML pipeline config. An empty string runs the defaults.

 # Safety
 `config_toml` must be a NUL-terminated string; `out` must be writable.
 */
enum HsStatus hs_pipeline_run_toml(const char *config_toml, struct HsPipelineResult **out);

/*
 # Safety
 `result` must be a live handle; `out` must be writable.
 */
enum HsStatus hs_pipeline_score(const struct HsPipelineResult *result, struct HsScore *out);

/*
 Flagged components per window as a JSON object keyed by window index.
 Free the result with [`hs_string_free`].

 # Safety
 `result` must be a live handle; `out` must be writable.
 */
enum HsStatus hs_pipeline_flagged_json(const struct HsPipelineResult *result, char **out);

/*
 Full score report as JSON. Free the result with [`hs_string_free`].

 # Safety
 `result` must be a live handle; `out` must be writable.
 */
enum HsStatus hs_pipeline_report_json(const struct HsPipelineResult *result, char **out);

/*
 # Safety
 `result` must come from this library and not have been freed. Null is
 ignored.
 */
void hs_pipeline_free(struct HsPipelineResult *result);

/*
 Success probability of a path with serial healths `serial` and redundancy
 groups laid out back to back in `group_healths`, group `i` holding
 `group_sizes[i]` members.

 # Safety
 Each pointer must reference the stated number of elements (it may be null
 when the count is zero); `out` must be writable.
 */
enum HsStatus hs_path_availability(const double *serial,
                                   size_t serial_len,
                                   const size_t *group_sizes,
                                   size_t group_count,
                                   const double *group_healths,
                                   size_t group_healths_len,
                                   double *out);

/*
 Local outlier factor of `n_points` points of dimension `dims`, stored row
 by row in `points`. Writes one score per point into `scores`.

 # Safety
 `points` must hold `n_points * dims` values and `scores` room for
 `n_points`.
 */
enum HsStatus hs_lof(const double *points, size_t n_points, size_t dims, size_t k, double *scores);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HEALTHSCOPE_H */
