#include "airfl/airfl.h"

#include <cstring>
#include <exception>
#include <fstream>
#include <new>
#include <string>

#include "airfl/config.hpp"
#include "airfl/error.hpp"
#include "airfl/harness.hpp"

struct airfl_config {
    airfl::ExperimentConfig value;
};

struct airfl_experiment {
    airfl::Experiment value;
};

struct airfl_sweep {
    airfl::SweepResult value;
};

namespace {

thread_local std::string last_error;

airfl_status set_error(airfl_status status, const char* what)
{
    last_error = what;
    return status;
}

airfl_status map_kind(airfl::ErrorKind kind)
{
    switch (kind) {
    case airfl::ErrorKind::invalid_argument: return AIRFL_ERR_INVALID_ARGUMENT;
    case airfl::ErrorKind::domain: return AIRFL_ERR_DOMAIN;
    case airfl::ErrorKind::infeasible: return AIRFL_ERR_INFEASIBLE;
    case airfl::ErrorKind::io: return AIRFL_ERR_IO;
    case airfl::ErrorKind::internal: return AIRFL_ERR_INTERNAL;
    }
    return AIRFL_ERR_INTERNAL;
}

template <typename F>
airfl_status guarded(F&& body)
{
    try {
        body();
        last_error.clear();
        return AIRFL_OK;
    } catch (const airfl::Error& e) {
        return set_error(map_kind(e.kind()), e.what());
    } catch (const std::bad_alloc&) {
        return set_error(AIRFL_ERR_INTERNAL, "out of memory");
    } catch (const std::exception& e) {
        return set_error(AIRFL_ERR_INTERNAL, e.what());
    } catch (...) {
        return set_error(AIRFL_ERR_INTERNAL, "unknown error");
    }
}

std::ofstream open_output(const char* path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) airfl::fail(airfl::ErrorKind::io, std::string("cannot open output file: ") + path);
    return out;
}

void check_written(std::ofstream& out, const char* path)
{
    out.flush();
    if (!out) airfl::fail(airfl::ErrorKind::io, std::string("write failed: ") + path);
}

} // namespace

extern "C" {

const char* airfl_version(void)
{
    return "1.0.0";
}

const char* airfl_status_string(airfl_status status)
{
    switch (status) {
    case AIRFL_OK: return "ok";
    case AIRFL_ERR_NULL_ARGUMENT: return "null argument";
    case AIRFL_ERR_INVALID_ARGUMENT: return "invalid argument";
    case AIRFL_ERR_DOMAIN: return "domain error";
    case AIRFL_ERR_INFEASIBLE: return "infeasible";
    case AIRFL_ERR_IO: return "i/o error";
    case AIRFL_ERR_INTERNAL: return "internal error";
    case AIRFL_ERR_BUFFER_TOO_SMALL: return "buffer too small";
    case AIRFL_ERR_OUT_OF_RANGE: return "index out of range";
    }
    return "unknown status";
}

const char* airfl_last_error(void)
{
    return last_error.c_str();
}

airfl_status airfl_config_create(airfl_config** out)
{
    if (!out) return set_error(AIRFL_ERR_NULL_ARGUMENT, "out is null");
    *out = nullptr;
    return guarded([&] { *out = new airfl_config{}; });
}

void airfl_config_destroy(airfl_config* config)
{
    delete config;
}

airfl_status airfl_config_set(airfl_config* config, const char* key, const char* value)
{
    if (!config || !key || !value) return set_error(AIRFL_ERR_NULL_ARGUMENT, "null argument");
    return guarded([&] { config->value.set(key, value); });
}

airfl_status airfl_config_get(const airfl_config* config, const char* key, char* buf, size_t size, size_t* needed)
{
    if (!config || !key) return set_error(AIRFL_ERR_NULL_ARGUMENT, "null argument");
    std::string text;
    const auto st = guarded([&] { text = config->value.get(key); });
    if (st != AIRFL_OK) return st;
    if (needed) *needed = text.size() + 1;
    if (!buf) return AIRFL_OK;
    if (size < text.size() + 1) return set_error(AIRFL_ERR_BUFFER_TOO_SMALL, "buffer too small");
    std::memcpy(buf, text.c_str(), text.size() + 1);
    return AIRFL_OK;
}

airfl_status airfl_config_load_file(airfl_config* config, const char* path)
{
    if (!config || !path) return set_error(AIRFL_ERR_NULL_ARGUMENT, "null argument");
    return guarded([&] { config->value.load_file(path); });
}

airfl_status airfl_config_validate(const airfl_config* config)
{
    if (!config) return set_error(AIRFL_ERR_NULL_ARGUMENT, "config is null");
    return guarded([&] { config->value.validate(); });
}

airfl_status airfl_experiment_create(const airfl_config* config, airfl_experiment** out)
{
    if (!config || !out) return set_error(AIRFL_ERR_NULL_ARGUMENT, "null argument");
    *out = nullptr;
    return guarded([&] { *out = new airfl_experiment{airfl::Experiment(config->value)}; });
}

void airfl_experiment_destroy(airfl_experiment* experiment)
{
    delete experiment;
}

airfl_status airfl_experiment_step(airfl_experiment* experiment, int* finished)
{
    if (!experiment) return set_error(AIRFL_ERR_NULL_ARGUMENT, "experiment is null");
    return guarded([&] {
        if (!experiment->value.finished()) experiment->value.step();
        if (finished) *finished = experiment->value.finished() ? 1 : 0;
    });
}

airfl_status airfl_experiment_run(airfl_experiment* experiment)
{
    if (!experiment) return set_error(AIRFL_ERR_NULL_ARGUMENT, "experiment is null");
    return guarded([&] { experiment->value.run(); });
}

airfl_status airfl_experiment_row_count(const airfl_experiment* experiment, size_t* out)
{
    if (!experiment || !out) return set_error(AIRFL_ERR_NULL_ARGUMENT, "null argument");
    *out = experiment->value.metrics().size();
    return AIRFL_OK;
}

airfl_status airfl_experiment_metrics(const airfl_experiment* experiment, size_t row, airfl_round_metrics* out)
{
    if (!experiment || !out) return set_error(AIRFL_ERR_NULL_ARGUMENT, "null argument");
    const auto& rows = experiment->value.metrics();
    if (row >= rows.size()) return set_error(AIRFL_ERR_OUT_OF_RANGE, "row out of range");
    const auto& m = rows[row];
    *out = {m.round, m.loss, m.accuracy, m.bias_sq, m.mse, m.objective, m.bound, m.aggregated};
    return AIRFL_OK;
}

airfl_status airfl_experiment_summary(const airfl_experiment* experiment, double* final_accuracy,
                                      double* final_loss)
{
    if (!experiment) return set_error(AIRFL_ERR_NULL_ARGUMENT, "experiment is null");
    return guarded([&] {
        if (final_accuracy) *final_accuracy = experiment->value.final_accuracy();
        if (final_loss) *final_loss = experiment->value.final_loss();
    });
}

airfl_status airfl_experiment_write(const airfl_experiment* experiment, const char* metrics_path,
                                    const char* assignments_path, const char* trace_path,
                                    const char* summary_path)
{
    if (!experiment) return set_error(AIRFL_ERR_NULL_ARGUMENT, "experiment is null");
    return guarded([&] {
        const auto& e = experiment->value;
        if (metrics_path) {
            auto out = open_output(metrics_path);
            e.write_metrics_csv(out);
            check_written(out, metrics_path);
        }
        if (assignments_path) {
            auto out = open_output(assignments_path);
            out << e.assignments_csv();
            check_written(out, assignments_path);
        }
        if (trace_path) {
            auto out = open_output(trace_path);
            out << e.trace_csv();
            check_written(out, trace_path);
        }
        if (summary_path) {
            auto out = open_output(summary_path);
            airfl::write_summary_json(out, e);
            check_written(out, summary_path);
        }
    });
}

airfl_status airfl_sweep_run(const airfl_config* config, const char* axis, airfl_sweep** out)
{
    if (!config || !axis || !out) return set_error(AIRFL_ERR_NULL_ARGUMENT, "null argument");
    *out = nullptr;
    return guarded([&] { *out = new airfl_sweep{airfl::run_sweep(config->value, axis)}; });
}

void airfl_sweep_destroy(airfl_sweep* sweep)
{
    delete sweep;
}

airfl_status airfl_sweep_point_count(const airfl_sweep* sweep, size_t* out)
{
    if (!sweep || !out) return set_error(AIRFL_ERR_NULL_ARGUMENT, "null argument");
    *out = sweep->value.points.size();
    return AIRFL_OK;
}

airfl_status airfl_sweep_point(const airfl_sweep* sweep, size_t index, double* value, double* mean_accuracy,
                               double* std_accuracy, double* mean_loss)
{
    if (!sweep) return set_error(AIRFL_ERR_NULL_ARGUMENT, "sweep is null");
    if (index >= sweep->value.points.size()) return set_error(AIRFL_ERR_OUT_OF_RANGE, "point out of range");
    const auto& p = sweep->value.points[index];
    if (value) *value = p.value;
    if (mean_accuracy) *mean_accuracy = p.mean_accuracy;
    if (std_accuracy) *std_accuracy = p.std_accuracy;
    if (mean_loss) *mean_loss = p.mean_loss;
    return AIRFL_OK;
}

airfl_status airfl_sweep_write_json(const airfl_sweep* sweep, const char* path)
{
    if (!sweep || !path) return set_error(AIRFL_ERR_NULL_ARGUMENT, "null argument");
    return guarded([&] {
        auto out = open_output(path);
        airfl::write_sweep_json(out, sweep->value);
        check_written(out, path);
    });
}

} // extern "C"
