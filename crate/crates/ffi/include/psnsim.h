#ifndef PSNSIM_H
#define PSNSIM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define PSN_TOPOLOGY_CROSSROAD 0

#define PSN_TOPOLOGY_LINE 1

#define PSN_TOPOLOGY_MESH 2

#define PSN_PROTOCOL_CSMA 0

#define PSN_PROTOCOL_TDMA 1

#define PSN_PROTOCOL_FUNNELING 2

#define PSN_PROTOCOL_IQUEUE 3

// Result of every fallible call.
typedef enum PsnStatus {
  PSN_STATUS_OK = 0,
  // A required pointer was null.
  PSN_STATUS_NULL_ARGUMENT = 1,
  // An argument was out of range or not valid UTF-8.
  PSN_STATUS_INVALID_ARGUMENT = 2,
  // The scenario failed validation.
  PSN_STATUS_CONFIG = 3,
  // The simulation or its statistics failed.
  PSN_STATUS_RUNTIME = 4,
  // Writing artifacts failed.
  PSN_STATUS_IO = 5,
  // An internal panic was caught at the boundary.
  PSN_STATUS_PANIC = 6,
} PsnStatus;

// The result of one simulation run.
typedef struct PsnRun PsnRun;

// A scenario description, not yet validated.
typedef struct PsnScenario PsnScenario;

// Headline metrics of a run. Unavailable values are NaN.
typedef struct PsnSummary {
  uint64_t seed;
  uint64_t events;
  double cycle_length_s;
  uint64_t records;
  uint64_t delivered;
  double delivery_ratio;
  double delay_p50_s;
  double delay_p90_s;
  double delay_p99_s;
  uint64_t data_delivered;
  uint64_t data_collided;
  uint64_t data_lost;
  uint64_t data_dropped;
  double interarrival_shape;
  double interarrival_scale_s;
  double sensor_lifetime_mean_days;
  double sensor_lifetime_min_days;
  double router_lifetime_mean_days;
} PsnSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *psn_version(void);

// Message of the most recent failure on this thread, or an empty string.
// The pointer stays valid until the next failing call on the same thread.
const char *psn_last_error(void);

// Default scenario for one topology and protocol.
//
// # Safety
// `out` must be a valid pointer to writable storage for a handle.
enum PsnStatus psn_scenario_new(uint32_t topology, uint32_t protocol, struct PsnScenario **out);

// Parse a scenario from TOML text. Missing keys take their defaults.
//
// # Safety
// `toml` must be a NUL-terminated string; `out` must be writable.
enum PsnStatus psn_scenario_from_toml(const char *toml, struct PsnScenario **out);

// Set the simulated span in seconds.
//
// # Safety
// `scenario` must be a live handle from this library.
enum PsnStatus psn_scenario_set_duration(struct PsnScenario *scenario, double seconds);

// Validate the scenario and report its duty-cycle length and node count.
// Either output pointer may be null.
//
// # Safety
// `scenario` must be a live handle; non-null outputs must be writable.
enum PsnStatus psn_scenario_validate(const struct PsnScenario *scenario,
                                     double *cycle_length_s,
                                     size_t *node_count);

// # Safety
// `scenario` must be null or a handle not yet freed.
void psn_scenario_free(struct PsnScenario *scenario);

// Simulate the scenario once with `seed`.
//
// # Safety
// `scenario` must be a live handle; `out` must be writable.
enum PsnStatus psn_run(const struct PsnScenario *scenario, uint64_t seed, struct PsnRun **out);

// # Safety
// `run` must be a live handle; `out` must be writable.
enum PsnStatus psn_run_summary(const struct PsnRun *run, struct PsnSummary *out);

// Information delay at quantile `q` in `[0, 1]`, NaN when nothing arrived.
//
// # Safety
// `run` must be a live handle; `out` must be writable.
enum PsnStatus psn_run_delay_quantile(const struct PsnRun *run, double q, double *out);

// Number of nodes, gateway included.
//
// # Safety
// `run` must be a live handle; `out` must be writable.
enum PsnStatus psn_run_node_count(const struct PsnRun *run, size_t *out);

// Energy spent by `node` over the run (mJ) and its projected lifetime in
// days (infinity for a node that never drew power). Either output may be
// null.
//
// # Safety
// `run` must be a live handle; non-null outputs must be writable.
enum PsnStatus psn_run_node_energy(const struct PsnRun *run,
                                   size_t node,
                                   double *energy_mj,
                                   double *lifetime_days);

// Write the CSV and summary artifacts of the run into `dir`, creating it.
//
// # Safety
// `run` must be a live handle; `dir` must be a NUL-terminated path.
enum PsnStatus psn_run_write_artifacts(const struct PsnRun *run, const char *dir);

// # Safety
// `run` must be null or a handle not yet freed.
void psn_run_free(struct PsnRun *run);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PSNSIM_H */
