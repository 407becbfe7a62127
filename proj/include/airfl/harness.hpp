#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "airfl/aircomp.hpp"
#include "airfl/channel.hpp"
#include "airfl/clustering.hpp"
#include "airfl/config.hpp"
#include "airfl/convergence.hpp"
#include "airfl/core_model.hpp"
#include "airfl/power_opt.hpp"
#include "airfl/types.hpp"

namespace airfl {

/// Splits `indices` across `num_devices` shards. iid: shuffled, balanced (sizes
/// differ by at most one). noniid: classes are paired {0,1}, {2,3}, ... and each
/// pair is shared by an equal block of devices.
std::vector<Shard> partition_data(const Dataset& data, std::span<const std::size_t> indices,
                                  std::size_t num_devices, DataMode mode, Rng& rng);

struct RoundMetrics {
    std::size_t round = 0;
    double loss = 0.0;       // global training loss after the update
    double accuracy = 0.0;   // held-out accuracy (0 in quadratic mode)
    double bias_sq = 0.0;    // ||E[eps]||^2 over receiver noise
    double mse = 0.0;        // E||eps||^2
    double objective = 0.0;  // power-control objective at the chosen allocation
    double bound = 0.0;      // gap bound after this round
    double gap = 0.0;        // F(w) - F* (quadratic mode; loss otherwise)
    std::size_t aggregated = 0;   // gradients entering aggregation
    std::size_t solver_iterations = 0;
};

std::string metrics_csv_header();
void write_metrics_row(std::ostream& out, const RoundMetrics& m);

/// One configured training run. Rounds execute strictly in order; every random
/// draw comes from a stream derived from the master seed.
class Experiment {
public:
    explicit Experiment(ExperimentConfig config);

    bool finished() const noexcept { return rounds_done_ >= config_.rounds; }
    /// Runs the next round and returns its metrics.
    const RoundMetrics& step();
    void run();

    const ExperimentConfig& config() const noexcept { return config_; }
    const std::vector<RoundMetrics>& metrics() const noexcept { return metrics_; }
    const Model& model() const noexcept { return model_; }
    const Dataset& data() const noexcept { return data_; }
    const std::vector<Shard>& shards() const noexcept { return shards_; }
    const Geometry& geometry() const noexcept { return geometry_; }
    const ClusterAssignment& assignment() const noexcept { return assignment_; }
    const ChannelRealization& channels() const noexcept { return channels_; }
    const PowerAllocation& allocation() const noexcept { return allocation_; }
    const GradientSet& gradients() const noexcept { return gradients_; }
    const std::optional<QuadraticProblem>& quadratic() const noexcept { return quadratic_; }
    double learning_rate() const noexcept { return lr_; }
    /// ||delta||^2 used by the bound column (fixed at the first round).
    double delta_sq() const noexcept { return delta_sq_; }
    /// Exact ||delta||^2 at the model the latest round started from (quadratic mode).
    double current_delta_sq() const noexcept { return current_delta_sq_; }

    void write_metrics_csv(std::ostream& out) const;
    const std::string& assignments_csv() const noexcept { return assignments_csv_; }
    const std::string& trace_csv() const noexcept { return trace_csv_; }

    /// Mean accuracy and loss over the last `summary_window` rounds.
    double final_accuracy() const;
    double final_loss() const;

private:
    RoundMetrics evaluate(std::size_t round) const;
    void choose_clusters(std::size_t round, const std::vector<double>& importances);
    PowerAllocation choose_powers(const PowerProblem& problem, RoundMetrics& row);

    ExperimentConfig config_;
    double lr_ = 0.0;
    ChannelParams channel_params_;
    Dataset data_;
    Dataset test_data_;
    std::vector<std::size_t> test_indices_;
    std::vector<Shard> shards_;
    Model model_;
    Geometry geometry_;
    LinkageParams linkage_;
    PowerBudgets budgets_;
    std::vector<Rng> batch_rngs_;
    std::optional<QuadraticProblem> quadratic_;

    ClusterAssignment assignment_;
    bool have_assignment_ = false;
    ChannelRealization channels_;
    PowerAllocation allocation_;
    GradientSet gradients_;

    std::optional<GapBoundTracker> bound_;
    double delta_sq_ = 0.0;
    double current_delta_sq_ = 0.0;
    std::size_t rounds_done_ = 0;
    std::vector<RoundMetrics> metrics_;
    std::string assignments_csv_;
    std::string trace_csv_;
};

struct SweepPoint {
    double value = 0.0;
    std::vector<std::uint64_t> seeds;
    std::vector<double> accuracy;
    std::vector<double> loss;
    double mean_accuracy = 0.0;
    double std_accuracy = 0.0;  // sample standard deviation over seeds
    double mean_loss = 0.0;
};

struct SweepResult {
    std::string axis;  // "clusters" or "power"
    Scheme scheme = Scheme::proposed;
    std::vector<SweepPoint> points;
};

/// Mean and sample standard deviation (0 for a single value).
std::pair<double, double> mean_and_std(std::span<const double> values);

/// Runs `config.seeds` seeds (seed, seed+1, ...) of the configured experiment
/// and summarises final accuracy and loss.
SweepPoint summarize_seeds(const ExperimentConfig& config, double value);

/// One summary per entry of sweep_clusters or sweep_power.
SweepResult run_sweep(const ExperimentConfig& config, const std::string& axis);

void write_sweep_json(std::ostream& out, const SweepResult& result);
void write_summary_json(std::ostream& out, const Experiment& experiment);

} // namespace airfl
