#ifndef SAGIN_H
#define SAGIN_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Offload timing selector for [`sagin_run`].
 */
typedef enum SaginOffloadMode {
  SAGIN_OFFLOAD_MODE_BATCH = 0,
  SAGIN_OFFLOAD_MODE_PER_HOVER = 1,
} SaginOffloadMode;

/**
 * Collection scheme selector for [`sagin_run`].
 */
typedef enum SaginScheme {
  SAGIN_SCHEME_PROPOSED = 0,
  SAGIN_SCHEME_R_SCHEME = 1,
  SAGIN_SCHEME_F_SCHEME = 2,
} SaginScheme;

/**
 * Satellite selection policy selector for [`sagin_run`].
 */
typedef enum SaginSelection {
  SAGIN_SELECTION_MAX_THROUGHPUT = 0,
  SAGIN_SELECTION_RANDOM = 1,
  SAGIN_SELECTION_UNCHANGING = 2,
} SaginSelection;

/**
 * Result codes. Zero is success.
 */
typedef enum SaginStatus {
  SAGIN_STATUS_OK = 0,
  SAGIN_STATUS_NULL_POINTER = 1,
  SAGIN_STATUS_INVALID_ARGUMENT = 2,
  SAGIN_STATUS_PARSE = 3,
  SAGIN_STATUS_CONFIG = 4,
  SAGIN_STATUS_NOT_FOUND = 5,
  SAGIN_STATUS_INFEASIBLE = 6,
  SAGIN_STATUS_SCHEDULING = 7,
  SAGIN_STATUS_INTEGRITY = 8,
  SAGIN_STATUS_IO = 9,
  SAGIN_STATUS_OUT_OF_RANGE = 10,
  SAGIN_STATUS_PANIC = 11,
} SaginStatus;

/**
 * Opaque handle to a finished pipeline run.
 */
typedef struct SaginRun SaginRun;

/**
 * Opaque scenario handle.
 */
typedef struct SaginScenario SaginScenario;

/**
 * Pipeline settings. Enum-valued fields hold the integer values of
 * [`SaginScheme`], [`SaginSelection`] and [`SaginOffloadMode`].
 */
typedef struct SaginRunOptions {
  uint32_t scheme;
  uint32_t selection;
  uint32_t offload_mode;
  size_t gwo_population;
  size_t gwo_iterations;
} SaginRunOptions;

/**
 * Energy breakdown in joules.
 */
typedef struct SaginEnergyReport {
  double hover_energy_p1;
  double flight_energy;
  double device_energy;
  double sat_compute_energy;
  double hover_energy_p2;
  double total;
} SaginEnergyReport;

/**
 * One offload event.
 */
typedef struct SaginDecision {
  uint32_t uav_id;
  uint32_t sat_id;
  double t_request;
  double t_wait;
  double t_offload;
  double elevation;
  double rate;
  uint64_t data_bits;
  double t_tr;
  double t_sa;
} SaginDecision;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null after a success.
 * The pointer stays valid until the next call into this library on the
 * same thread.
 */
const char *sagin_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *sagin_version(void);

/**
 * Default pipeline settings: proposed scheme, max-throughput selection,
 * batch offload, GWO 50 x 200.
 */
struct SaginRunOptions sagin_run_options_default(void);

/**
 * Generates a scenario from the default configuration with the given seed
 * and counts.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum SaginStatus sagin_scenario_generate(uint64_t seed,
                                         size_t devices,
                                         size_t uavs,
                                         size_t sats,
                                         struct SaginScenario **out);

/**
 * Generates a scenario from a TOML configuration file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` valid for writes.
 */
enum SaginStatus sagin_scenario_from_config(const char *path, struct SaginScenario **out);

/**
 * Loads a scenario snapshot written by [`sagin_scenario_save`] or `sagin gen`.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` valid for writes.
 */
enum SaginStatus sagin_scenario_load(const char *path, struct SaginScenario **out);

/**
 * # Safety
 * `scenario` must be a live handle and `path` a NUL-terminated string.
 */
enum SaginStatus sagin_scenario_save(const struct SaginScenario *scenario, const char *path);

/**
 * Number of IoT devices, or 0 for a null handle.
 *
 * # Safety
 * `scenario` is null or a live handle.
 */
size_t sagin_scenario_device_count(const struct SaginScenario *scenario);

/**
 * Total device data in bits, or 0 for a null handle.
 *
 * # Safety
 * `scenario` is null or a live handle.
 */
uint64_t sagin_scenario_total_bits(const struct SaginScenario *scenario);

/**
 * # Safety
 * `scenario` is null or a handle not yet freed.
 */
void sagin_scenario_free(struct SaginScenario *scenario);

/**
 * Runs collection, trajectory planning and offloading on a scenario.
 *
 * # Safety
 * `scenario` must be a live handle, `options` null (defaults) or valid,
 * and `out` valid for writes.
 */
enum SaginStatus sagin_run(const struct SaginScenario *scenario,
                           const struct SaginRunOptions *options,
                           struct SaginRun **out);

/**
 * # Safety
 * `run` must be a live handle and `out` valid for writes.
 */
enum SaginStatus sagin_run_report(const struct SaginRun *run, struct SaginEnergyReport *out);

/**
 * Total UAV flight distance in meters.
 *
 * # Safety
 * `run` must be a live handle and `out` valid for writes.
 */
enum SaginStatus sagin_run_flight_distance(const struct SaginRun *run, double *out);

/**
 * Number of offload events, or 0 for a null handle.
 *
 * # Safety
 * `run` is null or a live handle.
 */
size_t sagin_run_decision_count(const struct SaginRun *run);

/**
 * # Safety
 * `run` must be a live handle and `out` valid for writes.
 */
enum SaginStatus sagin_run_decision(const struct SaginRun *run,
                                    size_t index,
                                    struct SaginDecision *out);

/**
 * Number of constraint violations found when re-checking the run.
 *
 * # Safety
 * `run` must be a live handle and `out` valid for writes.
 */
enum SaginStatus sagin_run_violation_count(const struct SaginRun *run, size_t *out);

/**
 * Writes the full solution (scenario plus decisions) as TOML, readable by
 * `sagin validate`.
 *
 * # Safety
 * `run` must be a live handle and `path` a NUL-terminated string.
 */
enum SaginStatus sagin_run_save_solution(const struct SaginRun *run, const char *path);

/**
 * # Safety
 * `run` is null or a handle not yet freed.
 */
void sagin_run_free(struct SaginRun *run);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SAGIN_H */
