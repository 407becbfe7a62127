#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "airfl/channel.hpp"
#include "airfl/rng.hpp"

namespace airfl {

using GradientSet = std::vector<std::vector<double>>;

/// Per-device and global first/second moments of the gradient entries.
struct GradientStats {
    std::vector<double> device_mean;
    std::vector<double> device_var;  // population variance, divisor M
    double mean = 0.0;               // average of device means
    double var = 0.0;                // average of device variances

    double stddev() const;
};

GradientStats compute_stats(const GradientSet& gradients);

/// s[m] = (g[m] - mean) / stddev with the *global* statistics.
std::vector<double> normalize(std::span<const double> gradient, const GradientStats& stats);
std::vector<double> denormalize(std::span<const double> symbols, const GradientStats& stats);

/// Transmit powers of one round. alpha[n][j] belongs to the j-th subordinate
/// of cluster n (same order as ClusterChannel::subordinates).
struct PowerAllocation {
    std::vector<std::vector<double>> alpha;
    std::vector<double> beta;
    double zeta = 1.0;
};

/// Per-device transmit power budgets (W).
struct PowerBudgets {
    std::vector<double> device_pmax;

    static PowerBudgets uniform(std::size_t num_devices, double pmax)
    {
        return {std::vector<double>(num_devices, pmax)};
    }
};

/// Expected transmit power of a lead: beta * (sum h'^2 alpha + sigma_n^2).
double lead_power(const ClusterChannel& cluster, std::span<const double> alpha, double beta);

/// zeta * h_n * sqrt(beta_n) * h'_j * sqrt(alpha_j).
double alignment_product(const ClusterChannel& cluster, std::span<const double> alpha,
                         double beta, double zeta, std::size_t j);

/// Throws (ErrorKind::infeasible) if any subordinate or lead budget is exceeded,
/// or zeta is not positive.
void check_allocation(const ChannelRealization& chan, const PowerAllocation& alloc,
                      const PowerBudgets& budgets);

/// Receiver noise for one round, kept so both error routes see the same draws.
struct NoiseDraws {
    std::vector<std::vector<double>> lead;  // per cluster, length M (zeros for a virtual relay)
    std::vector<double> ps;
};

NoiseDraws draw_noise(const ChannelRealization& chan, std::size_t dim, Rng& rng);
NoiseDraws zero_noise(const ChannelRealization& chan, std::size_t dim);

/// Superposition received at the lead of one cluster:
/// v[m] = sum_j h'_j sqrt(alpha_j) s_j[m] + z[m]. `symbols` is indexed by device id.
std::vector<double> intra_cluster_aggregate(const ClusterChannel& cluster,
                                            const GradientSet& symbols,
                                            std::span<const double> alpha,
                                            std::span<const double> noise);

/// Superposition received at the PS: v[m] = sum_n h_n sqrt(beta_n) v_n[m] + z[m].
std::vector<double> inter_cluster_aggregate(const ChannelRealization& chan,
                                            const GradientSet& lead_signals,
                                            std::span<const double> beta,
                                            std::span<const double> noise);

/// De-noising and de-normalisation: g[m] = stddev * (zeta / K) v[m] + mean.
std::vector<double> estimate_global(std::span<const double> ps_signal, const GradientStats& stats,
                                    double zeta, std::size_t num_devices);

struct AggregationOutcome {
    std::vector<double> estimated;  // gradient recovered at the PS
    std::vector<double> ideal;      // (1/K) sum_k g_k
    std::vector<double> error;      // estimated - ideal
    NoiseDraws noise;
};

/// Runs both hops end to end with the given noise draws.
AggregationOutcome aggregate(const GradientSet& gradients, const GradientStats& stats,
                             const ChannelRealization& chan, const PowerAllocation& alloc,
                             const PowerBudgets& budgets, NoiseDraws noise);

/// Aggregation error assembled term by term: misalignment of subordinates,
/// omitted lead gradients, and the two noise contributions.
std::vector<double> closed_form_error(const GradientSet& gradients, const GradientStats& stats,
                                      const ChannelRealization& chan, const PowerAllocation& alloc,
                                      const NoiseDraws& noise);

/// Checks that the direct difference and the closed form agree to 1e-9 (relative
/// to the error's scale) and returns the error. Throws ErrorKind::internal otherwise.
std::vector<double> aggregation_error(const AggregationOutcome& outcome, const GradientSet& gradients,
                                      const GradientStats& stats, const ChannelRealization& chan,
                                      const PowerAllocation& alloc);

/// E[error] over the receiver noise (noise-free part of the closed form).
std::vector<double> expected_error(const GradientSet& gradients, const GradientStats& stats,
                                   const ChannelRealization& chan, const PowerAllocation& alloc);

struct ErrorMoments {
    double bias_sq = 0.0;  // ||E[error]||^2
    double mse = 0.0;      // E||error||^2
};

/// Exact moments of the aggregation error over the receiver noise.
ErrorMoments error_moments(const GradientSet& gradients, const GradientStats& stats,
                           const ChannelRealization& chan, const PowerAllocation& alloc);

/// Centred gradients dg_k = g_k - mean and their total squared norm.
double sum_centered_sq(const GradientSet& gradients, const GradientStats& stats);

} // namespace airfl
