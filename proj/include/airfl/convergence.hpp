#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "airfl/core_model.hpp"

namespace airfl {

/// Contraction factor 2 L^2 lr^2 - L lr + 1.
double contraction_factor(double lipschitz, double learning_rate);

/// Throws (ErrorKind::domain) unless 0 < lr < 1 / (2 L).
void check_rate_premise(double lipschitz, double learning_rate);

struct GapBoundInputs {
    double lipschitz = 10.0;
    double learning_rate = 1e-3;
    std::size_t batch_size = 1;
    double delta_sq = 0.0;      // ||delta||^2, per-sample gradient variance bound
    double initial_gap = 0.0;   // F(w1) - F*
    std::vector<double> bias_sq;  // ||E[eps_t]||^2, t = 1..T
    std::vector<double> mse;      // E||eps_t||^2
};

/// eta^T gap0 + sum_t eta^(T-t) [L lr^2 delta^2 / m_b + lr/2 bias_t + L lr^2 mse_t]
/// over the first `rounds` entries.
double gap_bound(const GapBoundInputs& in, std::size_t rounds);

/// gap_bound for every prefix T' = 0..T (entry 0 is the initial gap).
std::vector<double> gap_bound_prefixes(const GapBoundInputs& in);

/// Incremental form of gap_bound, one round at a time.
class GapBoundTracker {
public:
    GapBoundTracker(double lipschitz, double learning_rate, std::size_t batch_size, double delta_sq,
                    double initial_gap);

    double step(double bias_sq, double mse);
    double value() const noexcept { return value_; }

private:
    double eta_;
    double noise_floor_;
    double half_lr_;
    double weight_mse_;
    double value_;
};

/// Least-squares objective F(w) = 1/2 w'Hw - b'w + c with its exact optimum.
struct QuadraticProblem {
    Eigen::MatrixXd hessian;
    Eigen::VectorXd linear;
    double constant = 0.0;
    Eigen::VectorXd minimizer;
    double lipschitz = 0.0;  // largest Hessian eigenvalue
    double optimum = 0.0;    // F*

    double value(std::span<const double> w) const;
    std::vector<double> gradient(std::span<const double> w) const;
    /// F(w) - F* evaluated as 1/2 (w - w*)'H(w - w*), never negative.
    double gap(std::span<const double> w) const;
};

/// F(w) = (1/K) sum_k local_loss_k(w) for the quadratic model.
QuadraticProblem make_quadratic_problem(const Dataset& data, const std::vector<Shard>& shards);

/// ||grad F(w)||^2 <= 2 L (F(w) - F*) (1 + 1e-9).
bool gradient_gap_check(const QuadraticProblem& problem, std::span<const double> w);

/// Least-squares data in which every device has Hessian L * I and the same
/// minimiser, so per-device gradients are unbiased for the global one.
/// Each device holds 2 * pairs_per_axis * dim samples x = +-sqrt(L dim) e_j.
struct IsotropicQuadraticSpec {
    std::size_t dim = 5;
    std::size_t num_devices = 10;
    std::size_t pairs_per_axis = 2;
    double lipschitz = 10.0;
    double target_noise = 1.0;  // half-gap of each symmetric target pair
    std::uint64_t seed = 1;
};

struct QuadraticTask {
    Dataset data;
    std::vector<Shard> shards;
    std::vector<double> minimizer;
};

QuadraticTask make_isotropic_quadratic(const IsotropicQuadraticSpec& spec);

/// Exact E[(g_batch[m] - reference[m])^2] per entry for a batch of `batch_size`
/// drawn without replacement from `shard`.
std::vector<double> batch_error_moments(const Model& model, const Dataset& data,
                                        std::span<const std::size_t> shard, std::size_t batch_size,
                                        std::span<const double> reference);

/// sum_m max_k batch_size * E[(g_k[m] - reference[m])^2]: the smallest ||delta||^2
/// valid at the current model.
double exact_delta_sq(const Model& model, const Dataset& data, const std::vector<Shard>& shards,
                      std::size_t batch_size, std::span<const double> reference);

/// max over devices of sum_m of the per-sample gradient variance of entry m.
double estimate_delta_sq(const Model& model, const Dataset& data, const std::vector<Shard>& shards);

} // namespace airfl
