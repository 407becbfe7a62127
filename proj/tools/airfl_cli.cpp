// Command-line driver: runs one experiment or a sweep through the C API.

#include <cstdio>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"

#include "airfl/airfl.h"

namespace {

struct ConfigHandle {
    airfl_config* ptr = nullptr;
    ~ConfigHandle() { airfl_config_destroy(ptr); }
};

struct ExperimentHandle {
    airfl_experiment* ptr = nullptr;
    ~ExperimentHandle() { airfl_experiment_destroy(ptr); }
};

struct SweepHandle {
    airfl_sweep* ptr = nullptr;
    ~SweepHandle() { airfl_sweep_destroy(ptr); }
};

bool check(airfl_status st, const char* what)
{
    if (st == AIRFL_OK) return true;
    std::fprintf(stderr, "airfl-cli: %s: %s (%s)\n", what, airfl_last_error(), airfl_status_string(st));
    return false;
}

// "run.csv" -> "run.<suffix>"
std::string sibling(const std::string& path, const std::string& suffix)
{
    const auto slash = path.find_last_of('/');
    const auto dot = path.find_last_of('.');
    const bool has_ext = dot != std::string::npos && (slash == std::string::npos || dot > slash);
    return (has_ext ? path.substr(0, dot) : path) + "." + suffix;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Two-tier over-the-air federated learning simulator"};

    std::string config_path;
    std::vector<std::string> overrides;
    std::string sweep;
    std::string out;
    bool quiet = false;

    // Flag name -> config key; only flags given on the command line are applied.
    std::vector<std::pair<CLI::Option*, std::string>> mapped;
    std::vector<std::string> values(12);
    auto add = [&](const char* flag, const char* key, const char* help, std::size_t slot) {
        mapped.emplace_back(app.add_option(flag, values[slot], help), key);
    };
    add("--devices", "devices", "number of devices K", 0);
    add("--clusters", "clusters", "number of clusters N", 1);
    add("--rounds", "rounds", "training rounds T", 2);
    add("--batch", "batch", "mini-batch size", 3);
    add("--lr", "lr", "learning rate (default 1/(100 L))", 4);
    add("--lipschitz", "lipschitz", "smoothness constant L", 5);
    add("--power-w", "power_w", "per-device power budget in watts", 6);
    add("--noise-dbm", "noise_dbm", "receiver noise power in dBm (-inf for none)", 7);
    add("--seed", "seed", "master seed", 10);
    mapped.emplace_back(app.add_option("--data", values[8], "data split")
                            ->check(CLI::IsMember({"iid", "noniid", "synthetic"})),
                        "data");
    mapped.emplace_back(
        app.add_option("--scheme", values[9], "aggregation scheme")
            ->check(CLI::IsMember({"proposed", "static", "similarity", "maxpower", "direct", "mse"})),
        "scheme");
    mapped.emplace_back(app.add_option("--model", values[11], "model architecture")
                            ->check(CLI::IsMember({"softmax", "mlp", "quadratic"})),
                        "model");

    app.add_option("--config", config_path, "key=value configuration file")->check(CLI::ExistingFile);
    app.add_option("--set", overrides, "extra key=value settings (applied after the file)");
    app.add_option("--sweep", sweep, "sweep axis")->check(CLI::IsMember({"clusters", "power"}));
    app.add_option("--out", out, "metrics CSV path (sweep: JSON summary path)");
    app.add_flag("--quiet", quiet, "suppress the summary line");

    CLI11_PARSE(app, argc, argv);

    ConfigHandle cfg;
    if (!check(airfl_config_create(&cfg.ptr), "create config")) return 1;
    if (!config_path.empty() && !check(airfl_config_load_file(cfg.ptr, config_path.c_str()), "load config")) return 2;
    for (const auto& kv : overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) {
            std::fprintf(stderr, "airfl-cli: --set expects key=value, got '%s'\n", kv.c_str());
            return 2;
        }
        const auto key = kv.substr(0, eq);
        if (!check(airfl_config_set(cfg.ptr, key.c_str(), kv.substr(eq + 1).c_str()), "--set")) return 2;
    }
    for (std::size_t i = 0; i < mapped.size(); ++i) {
        auto* opt = mapped[i].first;
        if (opt->count() == 0) continue;
        const auto& key = mapped[i].second;
        const auto value = opt->as<std::string>();
        if (!check(airfl_config_set(cfg.ptr, key.c_str(), value.c_str()), opt->get_name().c_str())) return 2;
    }
    if (!check(airfl_config_validate(cfg.ptr), "config")) return 2;

    if (!sweep.empty()) {
        SweepHandle sw;
        if (!check(airfl_sweep_run(cfg.ptr, sweep.c_str(), &sw.ptr), "sweep")) return 3;
        const std::string path = out.empty() ? "sweep.json" : out;
        if (!check(airfl_sweep_write_json(sw.ptr, path.c_str()), "write sweep")) return 4;
        if (!quiet) {
            size_t n = 0;
            airfl_sweep_point_count(sw.ptr, &n);
            for (size_t i = 0; i < n; ++i) {
                double value = 0, mean = 0, sd = 0, loss = 0;
                airfl_sweep_point(sw.ptr, i, &value, &mean, &sd, &loss);
                std::printf("%s=%g acc=%.4f sd=%.4f loss=%.6g\n", sweep.c_str(), value, mean, sd, loss);
            }
        }
        return 0;
    }

    ExperimentHandle exp;
    if (!check(airfl_experiment_create(cfg.ptr, &exp.ptr), "create experiment")) return 3;
    if (!check(airfl_experiment_run(exp.ptr), "run")) return 3;

    const std::string metrics = out.empty() ? "metrics.csv" : out;
    const auto assignments = sibling(metrics, "assignments.csv");
    const auto trace = sibling(metrics, "trace.csv");
    const auto summary = sibling(metrics, "summary.json");
    if (!check(airfl_experiment_write(exp.ptr, metrics.c_str(), assignments.c_str(), trace.c_str(), summary.c_str()),
               "write outputs")) {
        return 4;
    }
    if (!quiet) {
        double acc = 0, loss = 0;
        airfl_experiment_summary(exp.ptr, &acc, &loss);
        std::printf("final_accuracy=%.4f final_loss=%.6g metrics=%s\n", acc, loss, metrics.c_str());
    }
    return 0;
}
