#include "support.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "airfl/channel.hpp"
#include "airfl/clustering.hpp"

namespace test {

using namespace airfl;

Dataset tiny_blobs(std::size_t classes, std::size_t dim, std::size_t samples, std::uint64_t seed)
{
    BlobSpec spec;
    spec.classes = classes;
    spec.dim = dim;
    spec.samples = samples;
    spec.seed = seed;
    return make_blobs(spec);
}

Shard all_indices(const Dataset& data)
{
    Shard s(data.num_samples());
    std::iota(s.begin(), s.end(), std::size_t{0});
    return s;
}

std::string temp_dir(const std::string& tag)
{
    const auto dir = std::filesystem::temp_directory_path() / ("airfl_test_" + tag);
    std::filesystem::create_directories(dir);
    return dir.string();
}

void write_bytes(const std::string& path, const std::vector<unsigned char>& bytes)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

std::string read_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

GradientSet random_gradients(std::size_t devices, std::size_t dim, Rng& rng)
{
    std::normal_distribution<double> n;
    std::uniform_real_distribution<double> u(0.2, 2.0);
    GradientSet g(devices, std::vector<double>(dim));
    for (auto& row : g) {
        const double offset = 0.1 * n(rng);
        const double scale = 0.05 * u(rng);
        for (auto& v : row) v = offset + scale * n(rng);
    }
    return g;
}

PowerInstance random_power_instance(std::uint64_t seed, std::size_t devices, std::size_t clusters, std::size_t dim,
                                    double pmax)
{
    PowerInstance inst;
    auto rng = make_stream(seed, Stream::geometry, 77);
    inst.geometry = sample_ring_geometry(devices, 150.0, 200.0, rng);
    std::uniform_real_distribution<double> u(0.0, 2.3);
    std::vector<double> importance(devices);
    for (auto& v : importance) v = u(rng);
    const auto link = default_linkage_params(inst.geometry, 10);
    auto grouped = cluster_devices(inst.geometry, importance, clusters, link.rho).clusters;
    auto leads = select_leads(grouped, inst.geometry, importance, link.rho1, link.rho2);
    inst.assignment = make_assignment(std::move(grouped), std::move(leads), 1);

    ChannelParams params;
    inst.gradients = random_gradients(devices, dim, rng);
    inst.stats = compute_stats(inst.gradients);
    inst.problem.chan = sample_channels(inst.geometry, inst.assignment, params, rng);
    inst.problem.budgets = PowerBudgets::uniform(devices, pmax);
    inst.problem.coeffs = make_coefficients(sum_centered_sq(inst.gradients, inst.stats), inst.stats.var, dim, devices,
                                            1e-3, 10.0);
    return inst;
}

namespace oracle {

namespace {

constexpr double inf = std::numeric_limits<double>::infinity();

double lead_budget(const PowerProblem& p, std::size_t n)
{
    const auto& c = p.chan.clusters[n];
    return c.virtual_relay ? inf : p.budgets.device_pmax[c.lead];
}

double sub_budget(const PowerProblem& p, std::size_t n, std::size_t j)
{
    return p.budgets.device_pmax[p.chan.clusters[n].subordinates[j]];
}

// Minimises q(x) = curvature/2 x^2 - slope x over [lo, hi] by projected gradient.
double projected_gradient_1d(double x, double curvature, double slope, double lo, double hi)
{
    if (!(curvature > 0.0)) return slope > 0.0 ? hi : lo;
    const double step = 1.0 / curvature;
    for (int it = 0; it < 100; ++it) {
        const double next = std::clamp(x - step * (curvature * x - slope), lo, hi);
        if (next == x) break;
        x = next;
    }
    return x;
}

} // namespace

double objective(const PowerProblem& p, const PowerAllocation& a)
{
    const auto& q = p.coeffs;
    double mis = 0.0;
    double noise = p.chan.ps_noise;
    for (std::size_t n = 0; n < p.chan.clusters.size(); ++n) {
        const auto& c = p.chan.clusters[n];
        for (std::size_t j = 0; j < c.subordinates.size(); ++j) {
            const double w = a.zeta * c.lead_gain * std::sqrt(a.beta[n]) * c.sub_gain[j] * std::sqrt(a.alpha[n][j]);
            mis += (w - 1.0) * (w - 1.0);
        }
        noise += c.lead_gain * c.lead_gain * a.beta[n] * c.lead_noise;
    }
    return q.c1 * mis + q.c2 * q.nu_sq * a.zeta * a.zeta * noise;
}

std::vector<double> project_box_ball(const std::vector<double>& point, const std::vector<double>& upper, double radius)
{
    const auto n = point.size();
    std::vector<double> x = point;
    std::vector<double> p(n, 0.0);
    std::vector<double> q(n, 0.0);
    std::vector<double> y(n);
    for (int it = 0; it < 10000000; ++it) {
        for (std::size_t i = 0; i < n; ++i) y[i] = std::clamp(x[i] + p[i], 0.0, upper[i]);
        for (std::size_t i = 0; i < n; ++i) p[i] = x[i] + p[i] - y[i];
        double norm = 0.0;
        for (std::size_t i = 0; i < n; ++i) norm += (y[i] + q[i]) * (y[i] + q[i]);
        norm = std::sqrt(norm);
        const double shrink = norm > radius ? radius / norm : 1.0;
        double change = 0.0;
        double gap = 0.0;
        double scale = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double next = shrink * (y[i] + q[i]);
            q[i] = y[i] + q[i] - next;
            change = std::max(change, std::abs(next - x[i]));
            gap = std::max(gap, std::abs(next - y[i]));
            scale = std::max(scale, std::abs(next));
            x[i] = next;
        }
        // Both iterates must agree, not merely stall.
        const double tol = 1e-15 * std::max(scale, 1e-300);
        if (change <= tol && gap <= 1e3 * tol) break;
    }
    // Remove residual rounding outside the set.
    for (std::size_t i = 0; i < n; ++i) x[i] = std::clamp(x[i], 0.0, upper[i]);
    double norm = 0.0;
    for (double v : x) norm += v * v;
    norm = std::sqrt(norm);
    if (norm > radius) {
        for (auto& v : x) v *= radius / norm * (1.0 - 1e-15);
    }
    return x;
}

void optimize_zeta(const PowerProblem& p, PowerAllocation& a)
{
    const auto& chan = p.chan;
    const auto& q = p.coeffs;
    double curvature = 2.0 * q.c2 * q.nu_sq * chan.ps_noise;
    double slope = 0.0;
    for (std::size_t n = 0; n < chan.clusters.size(); ++n) {
        const auto& c = chan.clusters[n];
        for (std::size_t j = 0; j < c.subordinates.size(); ++j) {
            const double g = c.lead_gain * std::sqrt(a.beta[n]) * c.sub_gain[j] * std::sqrt(a.alpha[n][j]);
            curvature += 2.0 * q.c1 * g * g;
            slope += 2.0 * q.c1 * g;
        }
        curvature += 2.0 * q.c2 * q.nu_sq * c.lead_gain * c.lead_gain * a.beta[n] * c.lead_noise;
    }
    if (curvature > 0.0 && slope > 0.0) a.zeta = projected_gradient_1d(a.zeta, curvature, slope, 1e-300, inf);
}

void optimize_alpha(const PowerProblem& p, PowerAllocation& a)
{
    const auto& q = p.coeffs;
    for (std::size_t n = 0; n < p.chan.clusters.size(); ++n) {
        const auto& c = p.chan.clusters[n];
        const auto m = c.subordinates.size();
        if (m == 0) continue;
        const double amp = a.zeta * c.lead_gain * std::sqrt(a.beta[n]);
        if (amp == 0.0 || q.c1 == 0.0) continue;
        std::vector<double> upper(m);
        std::vector<double> u(m);
        for (std::size_t j = 0; j < m; ++j) {
            upper[j] = c.sub_gain[j] * std::sqrt(sub_budget(p, n, j));
            u[j] = c.sub_gain[j] * std::sqrt(a.alpha[n][j]);
        }
        double radius = inf;
        if (!c.virtual_relay) radius = std::sqrt(std::max(0.0, lead_budget(p, n) / a.beta[n] - c.lead_noise));
        // In u = h' sqrt(alpha) the block objective c1 sum (amp u - 1)^2 is isotropic.
        const double curvature = 2.0 * q.c1 * amp * amp;
        for (int it = 0; it < 1000; ++it) {
            std::vector<double> trial(m);
            for (std::size_t j = 0; j < m; ++j) trial[j] = u[j] - 2.0 * q.c1 * amp * (amp * u[j] - 1.0) / curvature;
            auto next = project_box_ball(trial, upper, radius);
            double change = 0.0;
            for (std::size_t j = 0; j < m; ++j) change = std::max(change, std::abs(next[j] - u[j]));
            u = std::move(next);
            if (change == 0.0) break;
        }
        for (std::size_t j = 0; j < m; ++j) {
            a.alpha[n][j] = c.sub_gain[j] > 0.0 ? std::min(std::pow(u[j] / c.sub_gain[j], 2), sub_budget(p, n, j)) : 0.0;
        }
        if (!c.virtual_relay) {
            auto lead_load = [&] {
                double rx = c.lead_noise;
                for (std::size_t j = 0; j < m; ++j) rx += c.sub_gain[j] * c.sub_gain[j] * a.alpha[n][j];
                return a.beta[n] * rx;
            };
            while (lead_load() > lead_budget(p, n)) {
                for (auto& v : a.alpha[n]) v = std::nextafter(v, 0.0);
            }
        }
    }
}

void optimize_beta(const PowerProblem& p, PowerAllocation& a)
{
    const auto& q = p.coeffs;
    for (std::size_t n = 0; n < p.chan.clusters.size(); ++n) {
        const auto& c = p.chan.clusters[n];
        if (c.virtual_relay || c.subordinates.empty()) continue;
        double rx = c.lead_noise;
        double curvature = 2.0 * q.c2 * a.zeta * a.zeta * q.nu_sq * c.lead_gain * c.lead_gain * c.lead_noise;
        double slope = 0.0;
        for (std::size_t j = 0; j < c.subordinates.size(); ++j) {
            rx += c.sub_gain[j] * c.sub_gain[j] * a.alpha[n][j];
            const double g = a.zeta * c.lead_gain * c.sub_gain[j] * std::sqrt(a.alpha[n][j]);
            curvature += 2.0 * q.c1 * g * g;
            slope += 2.0 * q.c1 * g;
        }
        const double vmax = std::sqrt(lead_budget(p, n) / rx);
        const double v = projected_gradient_1d(std::sqrt(a.beta[n]), curvature, slope, 0.0, vmax);
        double b = v * v;
        while (b > 0.0 && b * rx > lead_budget(p, n)) b = std::nextafter(b, 0.0);
        a.beta[n] = b;
    }
}

PowerAllocation starting_point(const PowerProblem& p)
{
    const auto& chan = p.chan;
    PowerAllocation a;
    a.alpha.resize(chan.clusters.size());
    a.beta.assign(chan.clusters.size(), 0.0);
    for (std::size_t n = 0; n < chan.clusters.size(); ++n) {
        const auto& c = chan.clusters[n];
        a.alpha[n].resize(c.subordinates.size());
        double rx = c.lead_noise;
        for (std::size_t j = 0; j < c.subordinates.size(); ++j) {
            a.alpha[n][j] = 0.5 * sub_budget(p, n, j);
            rx += c.sub_gain[j] * c.sub_gain[j] * a.alpha[n][j];
        }
        if (c.virtual_relay) {
            a.beta[n] = 1.0;
        } else if (!c.subordinates.empty()) {
            a.beta[n] = 0.5 * lead_budget(p, n) / rx;
        }
    }
    a.zeta = 1.0;
    optimize_zeta(p, a);
    return a;
}

BlockResult block_projected_gradient(const PowerProblem& p, std::size_t max_sweeps, double tol)
{
    BlockResult r;
    r.alloc = starting_point(p);
    double prev = oracle::objective(p, r.alloc);
    for (std::size_t s = 1; s <= max_sweeps; ++s) {
        optimize_alpha(p, r.alloc);
        optimize_beta(p, r.alloc);
        optimize_zeta(p, r.alloc);
        const double f = oracle::objective(p, r.alloc);
        r.sweeps = s;
        const bool done = prev == 0.0 || std::abs(prev - f) <= tol * std::abs(prev);
        prev = f;
        if (done) break;
    }
    r.objective = prev;
    return r;
}

std::vector<double> subset_objectives(const Geometry& g, const std::vector<double>& importance, double rho)
{
    const auto k = g.devices.size();
    std::vector<double> table(std::size_t{1} << k, 0.0);
    for (std::uint32_t s = 1; s < table.size(); ++s) {
        double best = inf;
        double peak = -inf;
        for (std::size_t p = 0; p < k; ++p) {
            if (!(s >> p & 1u)) continue;
            peak = std::max(peak, importance[p]);
            double worst = 0.0;
            for (std::size_t r = 0; r < k; ++r) {
                if (s >> r & 1u) {
                    worst = std::max(worst, std::hypot(g.devices[p].x - g.devices[r].x, g.devices[p].y - g.devices[r].y));
                }
            }
            best = std::min(best, worst);
        }
        table[s] = best + rho * peak;
    }
    return table;
}

GreedyTrace greedy_from_table(const std::vector<double>& table, std::size_t devices, std::size_t clusters)
{
    GreedyTrace t;
    for (std::size_t i = 0; i < devices; ++i) t.clusters.push_back(1u << i);
    while (t.clusters.size() > clusters) {
        // Clusters are kept ordered by their lowest member.
        std::size_t bi = 0;
        std::size_t bj = 1;
        double best = inf;
        for (std::size_t i = 0; i < t.clusters.size(); ++i) {
            for (std::size_t j = i + 1; j < t.clusters.size(); ++j) {
                const double v = table[t.clusters[i] | t.clusters[j]];
                if (v < best) {
                    best = v;
                    bi = i;
                    bj = j;
                }
            }
        }
        t.clusters[bi] |= t.clusters[bj];
        t.clusters.erase(t.clusters.begin() + static_cast<std::ptrdiff_t>(bj));
        t.linkage.push_back(best);
    }
    return t;
}

} // namespace oracle

} // namespace test
