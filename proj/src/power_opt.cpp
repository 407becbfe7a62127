#include "airfl/power_opt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "airfl/error.hpp"

namespace airfl {

namespace {

constexpr double inf = std::numeric_limits<double>::infinity();
constexpr int max_halvings = 200;
constexpr int max_doublings = 2000;

// Largest beta' <= beta with beta' * rx <= pmax.
double fit_budget(double beta, const ClusterChannel& c, std::span<const double> alpha, double pmax)
{
    while (beta > 0.0 && lead_power(c, alpha, beta) > pmax) beta = std::nextafter(beta, 0.0);
    return beta;
}

double received_power(const ClusterChannel& c, std::span<const double> alpha)
{
    return lead_power(c, alpha, 1.0);
}

} // namespace

ObjectiveCoefficients make_coefficients(double sum_centered_sq, double nu_sq, std::size_t dim,
                                        std::size_t num_devices, double learning_rate, double lipschitz)
{
    require(num_devices > 0 && dim > 0, ErrorKind::invalid_argument, "empty problem");
    require(learning_rate > 0.0 && lipschitz > 0.0, ErrorKind::invalid_argument,
            "learning rate and Lipschitz constant must be positive");
    const double a = learning_rate / 2.0;
    const double b = lipschitz * learning_rate * learning_rate;
    const double k2 = static_cast<double>(num_devices) * static_cast<double>(num_devices);
    ObjectiveCoefficients c;
    c.c1 = (a + b) * sum_centered_sq / k2;
    c.c2 = static_cast<double>(dim) * b / k2;
    c.nu_sq = nu_sq;
    c.sum_centered_sq = sum_centered_sq;
    c.dim = dim;
    c.num_devices = num_devices;
    return c;
}

ObjectiveCoefficients symbol_mse_coefficients(const ObjectiveCoefficients& base)
{
    require(base.nu_sq > 0.0, ErrorKind::domain, "degenerate normalization");
    ObjectiveCoefficients c = base;
    c.c1 = 1.0;
    c.c2 = 1.0 / base.nu_sq;
    return c;
}

double PowerProblem::sub_pmax(std::size_t n, std::size_t j) const
{
    return budgets.device_pmax.at(chan.clusters[n].subordinates[j]);
}

double PowerProblem::lead_pmax(std::size_t n) const
{
    const auto& c = chan.clusters[n];
    if (c.virtual_relay) return inf;
    return budgets.device_pmax.at(c.lead);
}

double misalignment(const ChannelRealization& chan, const PowerAllocation& alloc)
{
    double total = 0.0;
    for (std::size_t n = 0; n < chan.clusters.size(); ++n) {
        const auto& c = chan.clusters[n];
        for (std::size_t j = 0; j < c.subordinates.size(); ++j) {
            const double e = alignment_product(c, alloc.alpha[n], alloc.beta[n], alloc.zeta, j) - 1.0;
            total += e * e;
        }
    }
    return total;
}

double forwarded_noise(const ChannelRealization& chan, const PowerAllocation& alloc)
{
    double total = chan.ps_noise;
    for (std::size_t n = 0; n < chan.clusters.size(); ++n) {
        const auto& c = chan.clusters[n];
        total += c.lead_gain * c.lead_gain * alloc.beta[n] * c.lead_noise;
    }
    return total;
}

double bias_bound(const PowerProblem& problem, const PowerAllocation& alloc)
{
    const auto& q = problem.coeffs;
    const double k2 = static_cast<double>(q.num_devices) * static_cast<double>(q.num_devices);
    std::size_t leads = 0;
    for (const auto& c : problem.chan.clusters) leads += c.virtual_relay ? 0 : 1;
    return q.sum_centered_sq / k2 * (misalignment(problem.chan, alloc) + static_cast<double>(leads));
}

double mse_bound(const PowerProblem& problem, const PowerAllocation& alloc)
{
    const auto& q = problem.coeffs;
    const double k2 = static_cast<double>(q.num_devices) * static_cast<double>(q.num_devices);
    const double zn2 = alloc.zeta * alloc.zeta * q.nu_sq;
    return bias_bound(problem, alloc) + static_cast<double>(q.dim) * zn2 * forwarded_noise(problem.chan, alloc) / k2;
}

double objective(const PowerProblem& problem, const PowerAllocation& alloc)
{
    const auto& q = problem.coeffs;
    return q.c1 * misalignment(problem.chan, alloc) +
           q.c2 * alloc.zeta * alloc.zeta * q.nu_sq * forwarded_noise(problem.chan, alloc);
}

AlphaSolution solve_alpha(const PowerProblem& problem, std::span<const double> beta, double zeta)
{
    const auto& chan = problem.chan;
    const double c1 = problem.coeffs.c1;
    if (beta.size() != chan.clusters.size()) fail(ErrorKind::invalid_argument, "beta does not match clusters");

    AlphaSolution out;
    out.alpha.resize(chan.clusters.size());
    out.mu.assign(chan.clusters.size(), 0.0);

    for (std::size_t n = 0; n < chan.clusters.size(); ++n) {
        const auto& c = chan.clusters[n];
        const auto count = c.subordinates.size();
        auto& alpha = out.alpha[n];
        alpha.assign(count, 0.0);
        if (count == 0) continue;

        // Common forward amplitude of the cluster; each subordinate's optimum
        // is its regularised inverse h'_j sqrt(alpha_j) = c1 a / (c1 a^2 + mu).
        const double a = zeta * c.lead_gain * std::sqrt(beta[n]);
        const bool unbounded_lead = c.virtual_relay || beta[n] == 0.0;

        if (a == 0.0 || c1 == 0.0) {
            // Objective does not depend on alpha: spend nothing unless the lead
            // has no budget coupling, in which case transmit at full power.
            for (std::size_t j = 0; j < count; ++j) alpha[j] = unbounded_lead ? problem.sub_pmax(n, j) : 0.0;
            continue;
        }

        auto fill = [&](double mu) {
            const double amp = c1 * a / (c1 * a * a + mu);
            for (std::size_t j = 0; j < count; ++j) {
                const double pmax = problem.sub_pmax(n, j);
                const double h = c.sub_gain[j];
                if (h == 0.0) {
                    alpha[j] = 0.0;
                    continue;
                }
                const double root = amp / h;
                alpha[j] = std::min(root * root, pmax);
            }
        };

        fill(0.0);
        if (unbounded_lead) continue;

        const double pmax_lead = problem.lead_pmax(n);
        auto excess = [&](double mu) {
            fill(mu);
            return lead_power(c, alpha, beta[n]) - pmax_lead;
        };
        if (excess(0.0) <= 0.0) continue;
        if (beta[n] * c.lead_noise >= pmax_lead) fail(ErrorKind::infeasible, "infeasible lead budget");

        double lo = 0.0;
        double hi = c1 * a * a;
        int doublings = 0;
        while (excess(hi) > 0.0) {
            lo = hi;
            hi *= 2.0;
            if (++doublings > max_doublings) fail(ErrorKind::internal, "multiplier bracket not found");
        }
        for (int i = 0; i < max_halvings; ++i) {
            const double slack = excess(hi);
            if (-slack <= 1e-9 * pmax_lead) break;
            const double mid = 0.5 * (lo + hi);
            if (mid <= lo || mid >= hi) break;
            if (excess(mid) > 0.0) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        fill(hi);
        out.mu[n] = hi;
    }
    return out;
}

std::vector<double> solve_beta(const PowerProblem& problem, const std::vector<std::vector<double>>& alpha,
                               double zeta)
{
    const auto& chan = problem.chan;
    const auto& q = problem.coeffs;
    if (alpha.size() != chan.clusters.size()) fail(ErrorKind::invalid_argument, "alpha does not match clusters");

    std::vector<double> beta(chan.clusters.size(), 0.0);
    for (std::size_t n = 0; n < chan.clusters.size(); ++n) {
        const auto& c = chan.clusters[n];
        if (c.virtual_relay) {
            beta[n] = 1.0;
            continue;
        }
        if (c.subordinates.empty()) continue;

        double amp_sum = 0.0;
        double pow_sum = 0.0;
        for (std::size_t j = 0; j < c.subordinates.size(); ++j) {
            amp_sum += c.sub_gain[j] * std::sqrt(alpha[n][j]);
            pow_sum += c.sub_gain[j] * c.sub_gain[j] * alpha[n][j];
        }
        const double h = c.lead_gain;
        const double num = q.c1 * zeta * h * amp_sum;
        const double den = q.c1 * zeta * zeta * h * h * pow_sum +
                           q.c2 * zeta * zeta * q.nu_sq * h * h * c.lead_noise;
        if (!(den > 0.0) || !(num > 0.0)) continue;
        const double root = num / den;
        double b = root * root;

        const double rx = received_power(c, alpha[n]);
        if (rx > 0.0) b = std::min(b, problem.lead_pmax(n) / rx);
        beta[n] = fit_budget(b, c, alpha[n], problem.lead_pmax(n));
    }
    return beta;
}

std::optional<double> solve_zeta(const PowerProblem& problem, const std::vector<std::vector<double>>& alpha,
                                 std::span<const double> beta)
{
    const auto& chan = problem.chan;
    const auto& q = problem.coeffs;
    double num = 0.0;
    double den = q.c2 * q.nu_sq * chan.ps_noise;
    for (std::size_t n = 0; n < chan.clusters.size(); ++n) {
        const auto& c = chan.clusters[n];
        const double h2b = c.lead_gain * c.lead_gain * beta[n];
        for (std::size_t j = 0; j < c.subordinates.size(); ++j) {
            num += c.lead_gain * std::sqrt(beta[n]) * c.sub_gain[j] * std::sqrt(alpha[n][j]);
            den += q.c1 * h2b * c.sub_gain[j] * c.sub_gain[j] * alpha[n][j];
        }
        den += q.c2 * q.nu_sq * h2b * c.lead_noise;
    }
    num *= q.c1;
    if (!(num > 0.0) || !(den > 0.0) || !std::isfinite(num / den)) return std::nullopt;
    return num / den;
}

PowerAllocation initial_allocation(const PowerProblem& problem)
{
    const auto& chan = problem.chan;
    PowerAllocation alloc;
    alloc.alpha.resize(chan.clusters.size());
    alloc.beta.assign(chan.clusters.size(), 0.0);
    for (std::size_t n = 0; n < chan.clusters.size(); ++n) {
        const auto& c = chan.clusters[n];
        alloc.alpha[n].resize(c.subordinates.size());
        for (std::size_t j = 0; j < c.subordinates.size(); ++j) alloc.alpha[n][j] = 0.5 * problem.sub_pmax(n, j);
        if (c.virtual_relay) {
            alloc.beta[n] = 1.0;
        } else if (!c.subordinates.empty()) {
            const double rx = received_power(c, alloc.alpha[n]);
            alloc.beta[n] = fit_budget(0.5 * problem.lead_pmax(n) / rx, c, alloc.alpha[n], problem.lead_pmax(n));
        }
    }
    alloc.zeta = solve_zeta(problem, alloc.alpha, alloc.beta).value_or(1.0);
    return alloc;
}

PowerAllocation max_power_allocation(const PowerProblem& problem)
{
    const auto& chan = problem.chan;
    PowerAllocation alloc;
    alloc.alpha.resize(chan.clusters.size());
    alloc.beta.assign(chan.clusters.size(), 0.0);
    for (std::size_t n = 0; n < chan.clusters.size(); ++n) {
        const auto& c = chan.clusters[n];
        alloc.alpha[n].resize(c.subordinates.size());
        for (std::size_t j = 0; j < c.subordinates.size(); ++j) alloc.alpha[n][j] = problem.sub_pmax(n, j);
        if (c.virtual_relay) {
            alloc.beta[n] = 1.0;
        } else {
            const double rx = received_power(c, alloc.alpha[n]);
            if (rx > 0.0) {
                alloc.beta[n] = fit_budget(problem.lead_pmax(n) / rx, c, alloc.alpha[n], problem.lead_pmax(n));
            }
        }
    }
    alloc.zeta = solve_zeta(problem, alloc.alpha, alloc.beta).value_or(1.0);
    return alloc;
}

SolverResult alternating_minimize(const PowerProblem& problem, const SolverOptions& options,
                                  std::optional<PowerAllocation> init)
{
    if (options.max_iterations < 1) fail(ErrorKind::invalid_argument, "need at least one iteration");
    if (!(options.tolerance > 0.0)) fail(ErrorKind::invalid_argument, "tolerance must be positive");

    SolverResult res;
    res.alloc = init ? std::move(*init) : initial_allocation(problem);
    if (!is_feasible(problem, res.alloc)) fail(ErrorKind::infeasible, "initial allocation is infeasible");

    double prev = objective(problem, res.alloc);
    res.trace.initial_objective = prev;

    for (std::size_t i = 1; i <= options.max_iterations; ++i) {
        PowerAllocation next = res.alloc;
        res.alpha_beta = next.beta;
        res.alpha_zeta = next.zeta;
        res.last_alpha = solve_alpha(problem, next.beta, next.zeta);
        next.alpha = res.last_alpha.alpha;
        next.beta = solve_beta(problem, next.alpha, next.zeta);
        if (auto z = solve_zeta(problem, next.alpha, next.beta)) next.zeta = *z;

        const double f = objective(problem, next);
        res.alloc = std::move(next);
        res.trace.objective_per_iter.push_back(f);
        res.trace.iterations = i;

        const bool done = prev == 0.0 || std::abs(f - prev) <= options.tolerance * std::abs(prev);
        prev = f;
        if (done) {
            res.trace.converged = true;
            break;
        }
    }
    return res;
}

AlphaKktResiduals alpha_kkt_residuals(const PowerProblem& problem, const AlphaSolution& solution,
                                      std::span<const double> beta, double zeta)
{
    const auto& chan = problem.chan;
    const double c1 = problem.coeffs.c1;
    AlphaKktResiduals r;
    r.min_bound_multiplier = inf;
    r.min_mu = inf;
    for (std::size_t n = 0; n < chan.clusters.size(); ++n) {
        const auto& c = chan.clusters[n];
        const double mu = solution.mu[n];
        r.min_mu = std::min(r.min_mu, mu);
        const double a = zeta * c.lead_gain * std::sqrt(beta[n]);
        for (std::size_t j = 0; j < c.subordinates.size(); ++j) {
            const double h = c.sub_gain[j];
            const double pmax = problem.sub_pmax(n, j);
            const double alpha = solution.alpha[n][j];
            r.primal = std::max(r.primal, (alpha - pmax) / pmax);
            const double scale = c1 * a * h;
            if (scale == 0.0) continue;
            // d/d sqrt(alpha) of the Lagrangian without the bound term, halved.
            const double grad = (c1 * a * a * h * h + mu * h * h) * std::sqrt(alpha) - scale;
            if (alpha < pmax) {
                r.stationarity = std::max(r.stationarity, std::abs(grad) / scale);
            } else {
                // Bound multiplier lambda = -2 grad must be non-negative.
                r.min_bound_multiplier = std::min(r.min_bound_multiplier, -grad / scale);
            }
        }
        if (!c.virtual_relay && beta[n] > 0.0 && !c.subordinates.empty()) {
            const double pmax_lead = problem.lead_pmax(n);
            const double slack = (pmax_lead - lead_power(c, solution.alpha[n], beta[n])) / pmax_lead;
            r.primal = std::max(r.primal, -slack);
            if (mu > 0.0) r.slackness = std::max(r.slackness, std::abs(slack));
        }
    }
    if (r.min_bound_multiplier == inf) r.min_bound_multiplier = 0.0;
    if (r.min_mu == inf) r.min_mu = 0.0;
    return r;
}

bool is_feasible(const PowerProblem& problem, const PowerAllocation& alloc)
{
    try {
        check_allocation(problem.chan, alloc, problem.budgets);
    } catch (const Error&) {
        return false;
    }
    return true;
}

void write_trace_csv(std::ostream& out, std::size_t round, const SolverTrace& trace)
{
    out << round << ",0," << trace.initial_objective << '\n';
    for (std::size_t i = 0; i < trace.objective_per_iter.size(); ++i) {
        out << round << ',' << (i + 1) << ',' << trace.objective_per_iter[i] << '\n';
    }
}

} // namespace airfl
