/* C interface to the two-tier over-the-air federated learning simulator.
 *
 * All objects are opaque handles created and destroyed by this library.
 * Functions return an airfl_status; on failure airfl_last_error() describes
 * the most recent error on the calling thread.
 */
#ifndef AIRFL_AIRFL_H
#define AIRFL_AIRFL_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  ifdef AIRFL_BUILDING_LIBRARY
#    define AIRFL_API __declspec(dllexport)
#  else
#    define AIRFL_API __declspec(dllimport)
#  endif
#else
#  define AIRFL_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum airfl_status {
    AIRFL_OK = 0,
    AIRFL_ERR_NULL_ARGUMENT = 1,
    AIRFL_ERR_INVALID_ARGUMENT = 2,
    AIRFL_ERR_DOMAIN = 3,
    AIRFL_ERR_INFEASIBLE = 4,
    AIRFL_ERR_IO = 5,
    AIRFL_ERR_INTERNAL = 6,
    AIRFL_ERR_BUFFER_TOO_SMALL = 7,
    AIRFL_ERR_OUT_OF_RANGE = 8
} airfl_status;

typedef struct airfl_config airfl_config;
typedef struct airfl_experiment airfl_experiment;
typedef struct airfl_sweep airfl_sweep;

typedef struct airfl_round_metrics {
    uint64_t round;
    double loss;
    double accuracy;
    double bias_sq;
    double mse;
    double objective;
    double bound;
    uint64_t aggregated;
} airfl_round_metrics;

AIRFL_API const char* airfl_version(void);
AIRFL_API const char* airfl_status_string(airfl_status status);
/* Message of the last failure on this thread; "" if none. */
AIRFL_API const char* airfl_last_error(void);

/* Configuration: defaults match the reference setup (K=50, N=5, 0.2 W, ...). */
AIRFL_API airfl_status airfl_config_create(airfl_config** out);
AIRFL_API void airfl_config_destroy(airfl_config* config);
AIRFL_API airfl_status airfl_config_set(airfl_config* config, const char* key, const char* value);
/* Copies the value of `key` into buf (NUL-terminated). *needed receives the
 * required size including the terminator; buf may be NULL to query it. */
AIRFL_API airfl_status airfl_config_get(const airfl_config* config, const char* key, char* buf, size_t size,
                                        size_t* needed);
AIRFL_API airfl_status airfl_config_load_file(airfl_config* config, const char* path);
AIRFL_API airfl_status airfl_config_validate(const airfl_config* config);

/* Experiments copy the configuration at creation. */
AIRFL_API airfl_status airfl_experiment_create(const airfl_config* config, airfl_experiment** out);
AIRFL_API void airfl_experiment_destroy(airfl_experiment* experiment);
/* Runs one round; *finished is set to 1 once every round has run. A finished
 * experiment is left unchanged. */
AIRFL_API airfl_status airfl_experiment_step(airfl_experiment* experiment, int* finished);
AIRFL_API airfl_status airfl_experiment_run(airfl_experiment* experiment);
/* Rows recorded so far, including the round-0 row of the initial model. */
AIRFL_API airfl_status airfl_experiment_row_count(const airfl_experiment* experiment, size_t* out);
AIRFL_API airfl_status airfl_experiment_metrics(const airfl_experiment* experiment, size_t row,
                                                airfl_round_metrics* out);
AIRFL_API airfl_status airfl_experiment_summary(const airfl_experiment* experiment, double* final_accuracy,
                                                double* final_loss);
/* Writes the metrics, assignments and solver-trace CSVs and a JSON summary.
 * Any path may be NULL to skip that file. */
AIRFL_API airfl_status airfl_experiment_write(const airfl_experiment* experiment, const char* metrics_path,
                                              const char* assignments_path, const char* trace_path,
                                              const char* summary_path);

/* Sweeps over "clusters" or "power", summarising `seeds` runs per point. */
AIRFL_API airfl_status airfl_sweep_run(const airfl_config* config, const char* axis, airfl_sweep** out);
AIRFL_API void airfl_sweep_destroy(airfl_sweep* sweep);
AIRFL_API airfl_status airfl_sweep_point_count(const airfl_sweep* sweep, size_t* out);
AIRFL_API airfl_status airfl_sweep_point(const airfl_sweep* sweep, size_t index, double* value,
                                         double* mean_accuracy, double* std_accuracy, double* mean_loss);
AIRFL_API airfl_status airfl_sweep_write_json(const airfl_sweep* sweep, const char* path);

#ifdef __cplusplus
}
#endif

#endif
