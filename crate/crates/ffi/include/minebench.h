#ifndef MINEBENCH_H
#define MINEBENCH_H

/* Generated by cbindgen from crates/ffi/src. Do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

/*
 Result code of every fallible call.
 */
typedef enum MbStatus {
  MB_STATUS_OK = 0,
  MB_STATUS_NULL_ARGUMENT = 1,
  MB_STATUS_INVALID_ARGUMENT = 2,
  MB_STATUS_PARSE_ERROR = 3,
  MB_STATUS_GENERATION_FAILED = 4,
  MB_STATUS_SCALE_EXCEEDED = 5,
  MB_STATUS_IO_ERROR = 6,
  MB_STATUS_SEMANTICS_ERROR = 7,
  MB_STATUS_NOT_FOUND = 8,
  MB_STATUS_PANIC = 9,
} MbStatus;

typedef enum MbFormat {
  MB_FORMAT_ACCESS_DATA = 0,
  MB_FORMAT_ACM = 1,
  MB_FORMAT_ACL = 2,
  MB_FORMAT_ATTRIBUTES = 3,
  MB_FORMAT_RULES = 4,
} MbFormat;

typedef enum MbSemantics {
  MB_SEMANTICS_PERMIT_ONLY = 0,
  MB_SEMANTICS_DENY_OVERRIDES = 1,
} MbSemantics;

/*
 Opaque policy handle.
 */
typedef struct MbPolicy MbPolicy;

/*
 Opaque scenario handle.
 */
typedef struct MbScenario MbScenario;

/*
 Parameters for a custom scenario. `exact_ones < 0` means the density
 window applies.
 */
typedef struct MbGenerationParams {
  size_t n_subjects;
  size_t n_objects;
  size_t n_subject_attrs;
  size_t n_object_attrs;
  uint32_t cardinality;
  size_t n_rules;
  double target_density;
  double density_tolerance;
  size_t max_conditions_per_rule;
  uint64_t seed;
  int64_t exact_ones;
} MbGenerationParams;

typedef struct MbMetrics {
  uint64_t tp;
  uint64_t tn;
  uint64_t fp;
  uint64_t fn_;
  double accuracy;
  double precision;
  double recall;
  double f1;
  double size_ratio;
  size_t mined_size;
  size_t ground_truth_size;
} MbMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message for the last failed call on this thread; empty after a success.
 The pointer stays valid until the next call on the same thread.
 */
const char *mb_last_error_message(void);

/*
 Releases a string returned by this library.

 # Safety
 `s` must come from this library and not have been freed.
 */
void mb_string_free(char *s);

/*
 Generates the scenario for a named preset such as `TC1` or `scal-2000`.

 # Safety
 `name` must be a NUL-terminated string; `out` must be writable.
 */
enum MbStatus mb_scenario_from_preset(const char *name, uint64_t seed, struct MbScenario **out);

/*
 Generates a custom scenario.

 # Safety
 `params` must point to a valid struct; `out` must be writable.
 */
enum MbStatus mb_scenario_generate(const struct MbGenerationParams *params,
                                   struct MbScenario **out);

/*
 Loads a scenario directory written by `mb_scenario_save` or the CLI.

 # Safety
 `dir` must be a NUL-terminated string; `out` must be writable.
 */
enum MbStatus mb_scenario_load(const char *dir, struct MbScenario **out);

/*
 # Safety
 `scenario` must be a live handle; `dir` a NUL-terminated string.
 */
enum MbStatus mb_scenario_save(const struct MbScenario *scenario, const char *dir);

/*
 # Safety
 `scenario` must be null or a handle from this library, freed once.
 */
void mb_scenario_free(struct MbScenario *scenario);

/*
 # Safety
 `scenario` must be a live handle; outputs must be writable.
 */
enum MbStatus mb_scenario_dims(const struct MbScenario *scenario,
                               size_t *n_subjects,
                               size_t *n_objects);

/*
 Writes 1 for permit, 0 for deny.

 # Safety
 `scenario` must be a live handle; `out` must be writable.
 */
enum MbStatus mb_scenario_cell(const struct MbScenario *scenario,
                               size_t subject,
                               size_t object,
                               uint8_t *out);

/*
 # Safety
 `scenario` must be a live handle; `out` must be writable.
 */
enum MbStatus mb_scenario_ones(const struct MbScenario *scenario, size_t *out);

/*
 Copies the ground-truth policy into a new handle.

 # Safety
 `scenario` must be a live handle; `out` must be writable.
 */
enum MbStatus mb_scenario_ground_truth(const struct MbScenario *scenario, struct MbPolicy **out);

/*
 Renders one of the scenario's text formats.

 # Safety
 `scenario` must be a live handle; `out` must be writable.
 */
enum MbStatus mb_scenario_render(const struct MbScenario *scenario,
                                 enum MbFormat format,
                                 char **out);

/*
 Prompt text for `strategy`. Matrix strategies get their attachments
 appended after a `--- <file> ---` line each.

 # Safety
 `scenario` must be a live handle; `strategy` a NUL-terminated string.
 */
enum MbStatus mb_build_prompt(const struct MbScenario *scenario, const char *strategy, char **out);

/*
 Parses rule lines leniently (prose lines are skipped).

 # Safety
 `text` must be a NUL-terminated string; `out` must be writable.
 */
enum MbStatus mb_policy_parse(const char *text, struct MbPolicy **out);

/*
 # Safety
 `policy` must be a live handle; `out` must be writable.
 */
enum MbStatus mb_policy_emit(const struct MbPolicy *policy, char **out);

/*
 Number of rules, or 0 for a null handle.

 # Safety
 `policy` must be null or a live handle.
 */
size_t mb_policy_len(const struct MbPolicy *policy);

/*
 # Safety
 `policy` must be null or a handle from this library, freed once.
 */
void mb_policy_free(struct MbPolicy *policy);

/*
 Greedy generalize-and-validate miner.

 # Safety
 `scenario` must be a live handle; `out` must be writable.
 */
enum MbStatus mb_mine_reference(const struct MbScenario *scenario, struct MbPolicy **out);

/*
 Exhaustive minimal policy for tiny scenarios.

 # Safety
 `scenario` must be a live handle; `out` must be writable.
 */
enum MbStatus mb_mine_exact(const struct MbScenario *scenario,
                            size_t size_budget,
                            struct MbPolicy **out);

/*
 Grades `policy` against the scenario's matrix.

 # Safety
 Handles must be live; `out` must be writable.
 */
enum MbStatus mb_evaluate(const struct MbScenario *scenario,
                          const struct MbPolicy *policy,
                          enum MbSemantics semantics,
                          struct MbMetrics *out);

/*
 Parses an input-method name (`access-data`, `acm`, `acl`); writes the
 matching [`MbFormat`].

 # Safety
 `name` must be a NUL-terminated string; `out` must be writable.
 */
enum MbStatus mb_format_from_name(const char *name, enum MbFormat *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MINEBENCH_H */
