#include "airfl/convergence.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "airfl/error.hpp"

namespace airfl {

namespace {

Eigen::Map<const Eigen::VectorXd> as_vector(std::span<const double> w)
{
    return {w.data(), static_cast<Eigen::Index>(w.size())};
}

} // namespace

double contraction_factor(double lipschitz, double learning_rate)
{
    const double lg = lipschitz * learning_rate;
    return 2.0 * lg * lg - lg + 1.0;
}

void check_rate_premise(double lipschitz, double learning_rate)
{
    require(lipschitz > 0.0, ErrorKind::invalid_argument, "Lipschitz constant must be positive");
    require(learning_rate > 0.0, ErrorKind::invalid_argument, "learning rate must be positive");
    if (!(learning_rate < 1.0 / (2.0 * lipschitz))) {
        fail(ErrorKind::domain, "learning rate must be below 1/(2L) for the gap bound");
    }
}

GapBoundTracker::GapBoundTracker(double lipschitz, double learning_rate, std::size_t batch_size,
                                 double delta_sq, double initial_gap)
{
    check_rate_premise(lipschitz, learning_rate);
    require(batch_size >= 1, ErrorKind::invalid_argument, "batch size must be positive");
    require(delta_sq >= 0.0 && initial_gap >= 0.0, ErrorKind::invalid_argument, "bound terms must be non-negative");
    eta_ = contraction_factor(lipschitz, learning_rate);
    weight_mse_ = lipschitz * learning_rate * learning_rate;
    noise_floor_ = weight_mse_ * delta_sq / static_cast<double>(batch_size);
    half_lr_ = 0.5 * learning_rate;
    value_ = initial_gap;
}

double GapBoundTracker::step(double bias_sq, double mse)
{
    require(bias_sq >= 0.0 && mse >= 0.0, ErrorKind::invalid_argument, "bound terms must be non-negative");
    value_ = eta_ * value_ + noise_floor_ + half_lr_ * bias_sq + weight_mse_ * mse;
    return value_;
}

std::vector<double> gap_bound_prefixes(const GapBoundInputs& in)
{
    require(in.bias_sq.size() == in.mse.size(), ErrorKind::invalid_argument, "bias and mse series differ in length");
    GapBoundTracker tracker(in.lipschitz, in.learning_rate, in.batch_size, in.delta_sq, in.initial_gap);
    std::vector<double> out;
    out.reserve(in.bias_sq.size() + 1);
    out.push_back(tracker.value());
    for (std::size_t t = 0; t < in.bias_sq.size(); ++t) out.push_back(tracker.step(in.bias_sq[t], in.mse[t]));
    return out;
}

double gap_bound(const GapBoundInputs& in, std::size_t rounds)
{
    require(rounds <= in.bias_sq.size() && rounds <= in.mse.size(), ErrorKind::invalid_argument,
            "not enough per-round error terms");
    GapBoundTracker tracker(in.lipschitz, in.learning_rate, in.batch_size, in.delta_sq, in.initial_gap);
    for (std::size_t t = 0; t < rounds; ++t) tracker.step(in.bias_sq[t], in.mse[t]);
    return tracker.value();
}

double QuadraticProblem::value(std::span<const double> w) const
{
    const auto x = as_vector(w);
    return 0.5 * x.dot(hessian * x) - linear.dot(x) + constant;
}

std::vector<double> QuadraticProblem::gradient(std::span<const double> w) const
{
    const Eigen::VectorXd g = hessian * as_vector(w) - linear;
    return {g.data(), g.data() + g.size()};
}

double QuadraticProblem::gap(std::span<const double> w) const
{
    const Eigen::VectorXd e = as_vector(w) - minimizer;
    return std::max(0.0, 0.5 * e.dot(hessian * e));
}

QuadraticProblem make_quadratic_problem(const Dataset& data, const std::vector<Shard>& shards)
{
    require(!shards.empty(), ErrorKind::invalid_argument, "no devices");
    require(data.targets.size() == data.num_samples(), ErrorKind::invalid_argument,
            "quadratic mode needs real-valued targets");
    const auto d = static_cast<Eigen::Index>(data.dim);
    QuadraticProblem q;
    q.hessian = Eigen::MatrixXd::Zero(d, d);
    q.linear = Eigen::VectorXd::Zero(d);
    for (const auto& shard : shards) {
        if (shard.empty()) fail(ErrorKind::invalid_argument, "empty dataset");
        const double w = 1.0 / (static_cast<double>(shard.size()) * static_cast<double>(shards.size()));
        for (auto i : shard) {
            const auto x = as_vector(data.row(i));
            const double y = data.targets[i];
            q.hessian.noalias() += w * x * x.transpose();
            q.linear += w * y * x;
            q.constant += w * 0.5 * y * y;
        }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(q.hessian);
    q.lipschitz = eig.eigenvalues().maxCoeff();
    if (!(eig.eigenvalues().minCoeff() > 0.0)) fail(ErrorKind::domain, "quadratic objective is not strongly convex");
    q.minimizer = q.hessian.ldlt().solve(q.linear);
    q.optimum = q.constant - 0.5 * q.linear.dot(q.minimizer);
    return q;
}

bool gradient_gap_check(const QuadraticProblem& problem, std::span<const double> w)
{
    const auto g = problem.gradient(w);
    double grad_sq = 0.0;
    for (double v : g) grad_sq += v * v;
    // Rounding floor of H w - b.
    const double scale = problem.lipschitz * as_vector(w).norm() + problem.linear.norm();
    const double floor = 1e3 * std::numeric_limits<double>::epsilon() * scale;
    return grad_sq <= 2.0 * problem.lipschitz * problem.gap(w) * (1.0 + 1e-9) + floor * floor;
}

QuadraticTask make_isotropic_quadratic(const IsotropicQuadraticSpec& spec)
{
    require(spec.dim >= 1 && spec.num_devices >= 1 && spec.pairs_per_axis >= 1, ErrorKind::invalid_argument,
            "empty quadratic task");
    require(spec.lipschitz > 0.0, ErrorKind::invalid_argument, "Lipschitz constant must be positive");
    auto rng = make_stream(spec.seed, Stream::data);
    std::normal_distribution<double> normal;

    QuadraticTask task;
    task.minimizer.resize(spec.dim);
    for (auto& w : task.minimizer) w = normal(rng);

    const double c = std::sqrt(spec.lipschitz * static_cast<double>(spec.dim));
    auto& data = task.data;
    data.dim = spec.dim;
    const std::size_t per_device = 2 * spec.pairs_per_axis * spec.dim;
    data.inputs.reserve(per_device * spec.num_devices * spec.dim);
    data.targets.reserve(per_device * spec.num_devices);

    std::uniform_int_distribution<int> coin(0, 1);
    for (std::size_t k = 0; k < spec.num_devices; ++k) {
        Shard shard;
        for (std::size_t j = 0; j < spec.dim; ++j) {
            for (std::size_t p = 0; p < spec.pairs_per_axis; ++p) {
                const double sign = coin(rng) ? 1.0 : -1.0;
                const double e = spec.target_noise * std::abs(normal(rng));
                for (double s : {1.0, -1.0}) {
                    shard.push_back(data.targets.size());
                    for (std::size_t m = 0; m < spec.dim; ++m) data.inputs.push_back(m == j ? sign * c : 0.0);
                    data.targets.push_back(sign * c * task.minimizer[j] + s * e);
                }
            }
        }
        task.shards.push_back(std::move(shard));
    }
    return task;
}

std::vector<double> batch_error_moments(const Model& model, const Dataset& data,
                                        std::span<const std::size_t> shard, std::size_t batch_size,
                                        std::span<const double> reference)
{
    const auto count = shard.size();
    if (count == 0) fail(ErrorKind::invalid_argument, "empty dataset");
    if (batch_size < 1 || batch_size > count) fail(ErrorKind::invalid_argument, "batch exceeds shard");
    if (reference.size() != model.size()) fail(ErrorKind::invalid_argument, "reference has wrong dimension");

    std::vector<double> mean(model.size(), 0.0);
    std::vector<double> sq(model.size(), 0.0);
    for (auto i : shard) {
        const auto g = sample_gradient(model, data, i);
        for (std::size_t m = 0; m < g.size(); ++m) {
            mean[m] += g[m];
            sq[m] += g[m] * g[m];
        }
    }
    const double n = static_cast<double>(count);
    const double b = static_cast<double>(batch_size);
    const double fpc = count > 1 ? (n - b) / (n - 1.0) : 0.0;
    std::vector<double> out(model.size());
    for (std::size_t m = 0; m < out.size(); ++m) {
        const double mu = mean[m] / n;
        const double var = std::max(0.0, sq[m] / n - mu * mu);
        const double off = mu - reference[m];
        out[m] = off * off + var / b * fpc;
    }
    return out;
}

double exact_delta_sq(const Model& model, const Dataset& data, const std::vector<Shard>& shards,
                      std::size_t batch_size, std::span<const double> reference)
{
    std::vector<double> worst(model.size(), 0.0);
    for (const auto& shard : shards) {
        const auto e = batch_error_moments(model, data, shard, batch_size, reference);
        for (std::size_t m = 0; m < e.size(); ++m) worst[m] = std::max(worst[m], e[m]);
    }
    double total = 0.0;
    for (double v : worst) total += static_cast<double>(batch_size) * v;
    return total;
}

double estimate_delta_sq(const Model& model, const Dataset& data, const std::vector<Shard>& shards)
{
    double worst = 0.0;
    for (const auto& shard : shards) {
        if (shard.empty()) continue;
        std::vector<double> mean(model.size(), 0.0);
        std::vector<double> sq(model.size(), 0.0);
        for (auto i : shard) {
            const auto g = sample_gradient(model, data, i);
            for (std::size_t m = 0; m < g.size(); ++m) {
                mean[m] += g[m];
                sq[m] += g[m] * g[m];
            }
        }
        const double n = static_cast<double>(shard.size());
        double total = 0.0;
        for (std::size_t m = 0; m < mean.size(); ++m) {
            const double mu = mean[m] / n;
            total += std::max(0.0, sq[m] / n - mu * mu);
        }
        worst = std::max(worst, total);
    }
    return worst;
}

} // namespace airfl
