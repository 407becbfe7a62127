#include "airfl/aircomp.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "airfl/error.hpp"

namespace airfl {

namespace {

std::size_t common_dim(const GradientSet& gradients)
{
    if (gradients.empty()) fail(ErrorKind::invalid_argument, "no gradients");
    const auto dim = gradients.front().size();
    if (dim == 0) fail(ErrorKind::invalid_argument, "empty gradient");
    for (const auto& g : gradients) {
        if (g.size() != dim) fail(ErrorKind::invalid_argument, "gradient dimensions differ");
    }
    return dim;
}

void check_shapes(const ChannelRealization& chan, const PowerAllocation& alloc)
{
    if (alloc.alpha.size() != chan.clusters.size() || alloc.beta.size() != chan.clusters.size()) {
        fail(ErrorKind::invalid_argument, "allocation does not match cluster count");
    }
    for (std::size_t n = 0; n < chan.clusters.size(); ++n) {
        if (alloc.alpha[n].size() != chan.clusters[n].subordinates.size()) {
            fail(ErrorKind::invalid_argument, "allocation does not match cluster size");
        }
    }
}

// Devices that are nobody's subordinate: their gradients never reach the PS.
std::vector<bool> transmitting_mask(const ChannelRealization& chan, std::size_t num_devices)
{
    std::vector<bool> sends(num_devices, false);
    for (const auto& c : chan.clusters) {
        for (auto k : c.subordinates) {
            if (k >= num_devices) fail(ErrorKind::invalid_argument, "device id out of range");
            sends[k] = true;
        }
    }
    return sends;
}

// Noise-free part of the error: misalignment plus omitted lead gradients.
std::vector<double> deterministic_error(const GradientSet& gradients, const GradientStats& stats,
                                        const ChannelRealization& chan, const PowerAllocation& alloc)
{
    const auto dim = common_dim(gradients);
    check_shapes(chan, alloc);
    const auto num_devices = gradients.size();
    const double inv_k = 1.0 / static_cast<double>(num_devices);

    std::vector<double> err(dim, 0.0);
    for (std::size_t n = 0; n < chan.clusters.size(); ++n) {
        const auto& c = chan.clusters[n];
        for (std::size_t j = 0; j < c.subordinates.size(); ++j) {
            const double w = alignment_product(c, alloc.alpha[n], alloc.beta[n], alloc.zeta, j) - 1.0;
            const auto& g = gradients[c.subordinates[j]];
            for (std::size_t m = 0; m < dim; ++m) err[m] += inv_k * w * (g[m] - stats.mean);
        }
    }
    const auto sends = transmitting_mask(chan, num_devices);
    for (std::size_t k = 0; k < num_devices; ++k) {
        if (sends[k]) continue;
        const auto& g = gradients[k];
        for (std::size_t m = 0; m < dim; ++m) err[m] -= inv_k * (g[m] - stats.mean);
    }
    return err;
}

} // namespace

double GradientStats::stddev() const
{
    return std::sqrt(var);
}

GradientStats compute_stats(const GradientSet& gradients)
{
    if (gradients.empty()) fail(ErrorKind::invalid_argument, "no gradients");
    const auto dim = common_dim(gradients);
    const double inv_m = 1.0 / static_cast<double>(dim);

    GradientStats s;
    s.device_mean.reserve(gradients.size());
    s.device_var.reserve(gradients.size());
    for (const auto& g : gradients) {
        double mean = 0.0;
        for (double v : g) mean += v;
        mean *= inv_m;
        double var = 0.0;
        for (double v : g) var += (v - mean) * (v - mean);
        var *= inv_m;
        s.device_mean.push_back(mean);
        s.device_var.push_back(var);
    }
    const double inv_k = 1.0 / static_cast<double>(gradients.size());
    for (std::size_t k = 0; k < gradients.size(); ++k) {
        s.mean += s.device_mean[k];
        s.var += s.device_var[k];
    }
    s.mean *= inv_k;
    s.var *= inv_k;
    return s;
}

std::vector<double> normalize(std::span<const double> gradient, const GradientStats& stats)
{
    const double nu = stats.stddev();
    if (!(nu > 0.0)) fail(ErrorKind::domain, "degenerate normalization");
    std::vector<double> s(gradient.size());
    for (std::size_t m = 0; m < gradient.size(); ++m) s[m] = (gradient[m] - stats.mean) / nu;
    return s;
}

std::vector<double> denormalize(std::span<const double> symbols, const GradientStats& stats)
{
    const double nu = stats.stddev();
    std::vector<double> g(symbols.size());
    for (std::size_t m = 0; m < symbols.size(); ++m) g[m] = nu * symbols[m] + stats.mean;
    return g;
}

double lead_power(const ClusterChannel& cluster, std::span<const double> alpha, double beta)
{
    double rx = cluster.lead_noise;
    for (std::size_t j = 0; j < alpha.size(); ++j) rx += cluster.sub_gain[j] * cluster.sub_gain[j] * alpha[j];
    return beta * rx;
}

double alignment_product(const ClusterChannel& cluster, std::span<const double> alpha,
                         double beta, double zeta, std::size_t j)
{
    return zeta * cluster.lead_gain * std::sqrt(beta) * cluster.sub_gain[j] * std::sqrt(alpha[j]);
}

void check_allocation(const ChannelRealization& chan, const PowerAllocation& alloc,
                      const PowerBudgets& budgets)
{
    check_shapes(chan, alloc);
    if (!(alloc.zeta > 0.0) || !std::isfinite(alloc.zeta)) {
        fail(ErrorKind::infeasible, "de-noising factor must be positive");
    }
    for (std::size_t n = 0; n < chan.clusters.size(); ++n) {
        const auto& c = chan.clusters[n];
        for (std::size_t j = 0; j < c.subordinates.size(); ++j) {
            const double a = alloc.alpha[n][j];
            const auto dev = c.subordinates[j];
            if (dev >= budgets.device_pmax.size()) fail(ErrorKind::invalid_argument, "missing device budget");
            if (!(a >= 0.0) || a > budgets.device_pmax[dev]) {
                fail(ErrorKind::infeasible,
                     "subordinate power budget violated at device " + std::to_string(dev));
            }
        }
        const double b = alloc.beta[n];
        if (!(b >= 0.0) || !std::isfinite(b)) fail(ErrorKind::infeasible, "lead power must be non-negative");
        if (c.virtual_relay) continue;
        if (c.lead >= budgets.device_pmax.size()) fail(ErrorKind::invalid_argument, "missing device budget");
        if (lead_power(c, alloc.alpha[n], b) > budgets.device_pmax[c.lead]) {
            fail(ErrorKind::infeasible, "lead power budget violated at device " + std::to_string(c.lead));
        }
    }
}

NoiseDraws draw_noise(const ChannelRealization& chan, std::size_t dim, Rng& rng)
{
    NoiseDraws z = zero_noise(chan, dim);
    for (std::size_t n = 0; n < chan.clusters.size(); ++n) {
        const double var = chan.clusters[n].lead_noise;
        if (var <= 0.0) continue;
        std::normal_distribution<double> normal(0.0, std::sqrt(var));
        for (auto& v : z.lead[n]) v = normal(rng);
    }
    if (chan.ps_noise > 0.0) {
        std::normal_distribution<double> normal(0.0, std::sqrt(chan.ps_noise));
        for (auto& v : z.ps) v = normal(rng);
    }
    return z;
}

NoiseDraws zero_noise(const ChannelRealization& chan, std::size_t dim)
{
    NoiseDraws z;
    z.lead.assign(chan.clusters.size(), std::vector<double>(dim, 0.0));
    z.ps.assign(dim, 0.0);
    return z;
}

std::vector<double> intra_cluster_aggregate(const ClusterChannel& cluster,
                                            const GradientSet& symbols,
                                            std::span<const double> alpha,
                                            std::span<const double> noise)
{
    if (alpha.size() != cluster.subordinates.size()) {
        fail(ErrorKind::invalid_argument, "allocation does not match cluster size");
    }
    std::vector<double> v(noise.begin(), noise.end());
    for (std::size_t j = 0; j < cluster.subordinates.size(); ++j) {
        const auto& s = symbols.at(cluster.subordinates[j]);
        if (s.size() != v.size()) fail(ErrorKind::invalid_argument, "symbol length mismatch");
        const double amp = cluster.sub_gain[j] * std::sqrt(alpha[j]);
        for (std::size_t m = 0; m < v.size(); ++m) v[m] += amp * s[m];
    }
    return v;
}

std::vector<double> inter_cluster_aggregate(const ChannelRealization& chan,
                                            const GradientSet& lead_signals,
                                            std::span<const double> beta,
                                            std::span<const double> noise)
{
    if (lead_signals.size() != chan.clusters.size() || beta.size() != chan.clusters.size()) {
        fail(ErrorKind::invalid_argument, "lead signals do not match cluster count");
    }
    std::vector<double> v(noise.begin(), noise.end());
    for (std::size_t n = 0; n < chan.clusters.size(); ++n) {
        const auto& sig = lead_signals[n];
        if (sig.size() != v.size()) fail(ErrorKind::invalid_argument, "lead signal length mismatch");
        const double amp = chan.clusters[n].lead_gain * std::sqrt(beta[n]);
        for (std::size_t m = 0; m < v.size(); ++m) v[m] += amp * sig[m];
    }
    return v;
}

std::vector<double> estimate_global(std::span<const double> ps_signal, const GradientStats& stats,
                                    double zeta, std::size_t num_devices)
{
    if (!(zeta > 0.0)) fail(ErrorKind::invalid_argument, "de-noising factor must be positive");
    if (num_devices == 0) fail(ErrorKind::invalid_argument, "no devices");
    const double scale = stats.stddev() * zeta / static_cast<double>(num_devices);
    std::vector<double> g(ps_signal.size());
    for (std::size_t m = 0; m < g.size(); ++m) g[m] = scale * ps_signal[m] + stats.mean;
    return g;
}

AggregationOutcome aggregate(const GradientSet& gradients, const GradientStats& stats,
                             const ChannelRealization& chan, const PowerAllocation& alloc,
                             const PowerBudgets& budgets, NoiseDraws noise)
{
    const auto dim = common_dim(gradients);
    check_allocation(chan, alloc, budgets);

    GradientSet symbols(gradients.size());
    const auto sends = transmitting_mask(chan, gradients.size());
    for (std::size_t k = 0; k < gradients.size(); ++k) {
        if (sends[k]) symbols[k] = normalize(gradients[k], stats);
    }

    GradientSet lead_signals;
    lead_signals.reserve(chan.clusters.size());
    for (std::size_t n = 0; n < chan.clusters.size(); ++n) {
        lead_signals.push_back(intra_cluster_aggregate(chan.clusters[n], symbols, alloc.alpha[n], noise.lead.at(n)));
    }
    const auto ps_signal = inter_cluster_aggregate(chan, lead_signals, alloc.beta, noise.ps);

    AggregationOutcome out;
    out.estimated = estimate_global(ps_signal, stats, alloc.zeta, gradients.size());
    out.ideal.assign(dim, 0.0);
    const double inv_k = 1.0 / static_cast<double>(gradients.size());
    for (const auto& g : gradients) {
        for (std::size_t m = 0; m < dim; ++m) out.ideal[m] += inv_k * g[m];
    }
    out.error.resize(dim);
    for (std::size_t m = 0; m < dim; ++m) out.error[m] = out.estimated[m] - out.ideal[m];
    out.noise = std::move(noise);
    return out;
}

std::vector<double> closed_form_error(const GradientSet& gradients, const GradientStats& stats,
                                      const ChannelRealization& chan, const PowerAllocation& alloc,
                                      const NoiseDraws& noise)
{
    auto err = deterministic_error(gradients, stats, chan, alloc);
    const double scale = alloc.zeta * stats.stddev() / static_cast<double>(gradients.size());
    for (std::size_t n = 0; n < chan.clusters.size(); ++n) {
        const double amp = scale * chan.clusters[n].lead_gain * std::sqrt(alloc.beta[n]);
        const auto& z = noise.lead.at(n);
        for (std::size_t m = 0; m < err.size(); ++m) err[m] += amp * z[m];
    }
    for (std::size_t m = 0; m < err.size(); ++m) err[m] += scale * noise.ps.at(m);
    return err;
}

std::vector<double> aggregation_error(const AggregationOutcome& outcome, const GradientSet& gradients,
                                      const GradientStats& stats, const ChannelRealization& chan,
                                      const PowerAllocation& alloc)
{
    const auto closed = closed_form_error(gradients, stats, chan, alloc, outcome.noise);
    double scale = 1.0;
    for (std::size_t m = 0; m < closed.size(); ++m) {
        scale = std::max({scale, std::abs(outcome.estimated[m]), std::abs(outcome.ideal[m])});
    }
    for (std::size_t m = 0; m < closed.size(); ++m) {
        if (std::abs(closed[m] - outcome.error[m]) > 1e-9 * scale) {
            fail(ErrorKind::internal, "aggregation error routes disagree at entry " + std::to_string(m));
        }
    }
    return outcome.error;
}

std::vector<double> expected_error(const GradientSet& gradients, const GradientStats& stats,
                                   const ChannelRealization& chan, const PowerAllocation& alloc)
{
    return deterministic_error(gradients, stats, chan, alloc);
}

ErrorMoments error_moments(const GradientSet& gradients, const GradientStats& stats,
                           const ChannelRealization& chan, const PowerAllocation& alloc)
{
    const auto bias = deterministic_error(gradients, stats, chan, alloc);
    ErrorMoments out;
    for (double v : bias) out.bias_sq += v * v;

    double noise = chan.ps_noise;
    for (std::size_t n = 0; n < chan.clusters.size(); ++n) {
        const auto& c = chan.clusters[n];
        noise += c.lead_gain * c.lead_gain * alloc.beta[n] * c.lead_noise;
    }
    const double k = static_cast<double>(gradients.size());
    const double zn = alloc.zeta * stats.stddev();
    out.mse = out.bias_sq + static_cast<double>(bias.size()) * zn * zn * noise / (k * k);
    return out;
}

double sum_centered_sq(const GradientSet& gradients, const GradientStats& stats)
{
    double total = 0.0;
    for (const auto& g : gradients) {
        for (double v : g) total += (v - stats.mean) * (v - stats.mean);
    }
    return total;
}

} // namespace airfl
