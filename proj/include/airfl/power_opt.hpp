#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "airfl/aircomp.hpp"
#include "airfl/channel.hpp"

namespace airfl {

/// Weights of the per-round objective
///   f = c1 * sum_{n,j} (zeta h_n sqrt(beta_n) h'_j sqrt(alpha_j) - 1)^2
///     + c2 * nu^2 zeta^2 (sum_n h_n^2 beta_n sigma_n^2 + sigma^2)
/// together with the round quantities they were built from.
struct ObjectiveCoefficients {
    double c1 = 1.0;
    double c2 = 1.0;
    double nu_sq = 1.0;             // global gradient variance
    double sum_centered_sq = 0.0;   // sum_k ||g_k - mean||^2
    std::size_t dim = 1;            // M
    std::size_t num_devices = 1;    // K
};

/// c1 = (A + B) S / K^2, c2 = M B / K^2 with A = lr / 2, B = L lr^2.
ObjectiveCoefficients make_coefficients(double sum_centered_sq, double nu_sq, std::size_t dim,
                                        std::size_t num_devices, double learning_rate, double lipschitz);

/// Weights for the symbol-domain MSE E||(zeta/K) v - (1/K) sum s||^2 with
/// unit-variance symbols: c1 = 1, c2 = 1 / nu^2.
ObjectiveCoefficients symbol_mse_coefficients(const ObjectiveCoefficients& base);

struct PowerProblem {
    ChannelRealization chan;
    PowerBudgets budgets;
    ObjectiveCoefficients coeffs;

    double sub_pmax(std::size_t n, std::size_t j) const;
    /// Lead budget of cluster n; infinite for a virtual relay.
    double lead_pmax(std::size_t n) const;
};

/// sum over subordinates of (alignment product - 1)^2.
double misalignment(const ChannelRealization& chan, const PowerAllocation& alloc);

/// sum_n h_n^2 beta_n sigma_n^2 + sigma^2.
double forwarded_noise(const ChannelRealization& chan, const PowerAllocation& alloc);

/// Upper bound on ||E[error]||^2 via Cauchy-Schwarz.
double bias_bound(const PowerProblem& problem, const PowerAllocation& alloc);

/// Upper bound on E||error||^2: bias bound plus the receiver-noise terms.
double mse_bound(const PowerProblem& problem, const PowerAllocation& alloc);

double objective(const PowerProblem& problem, const PowerAllocation& alloc);

struct AlphaSolution {
    std::vector<std::vector<double>> alpha;
    std::vector<double> mu;  // multiplier of each lead's sum-power constraint
};

/// Optimal subordinate powers for fixed beta and zeta. The multiplier of every
/// lead constraint is found by bisection; the returned point is always feasible.
AlphaSolution solve_alpha(const PowerProblem& problem, std::span<const double> beta, double zeta);

/// Optimal lead scalings for fixed alpha and zeta, clipped to each lead's budget.
std::vector<double> solve_beta(const PowerProblem& problem, const std::vector<std::vector<double>>& alpha,
                               double zeta);

/// Optimal de-noising factor for fixed alpha and beta; empty when the
/// objective does not depend on zeta through any signal path.
std::optional<double> solve_zeta(const PowerProblem& problem, const std::vector<std::vector<double>>& alpha,
                                 std::span<const double> beta);

struct SolverOptions {
    std::size_t max_iterations = 100;
    double tolerance = 1e-6;
};

struct SolverTrace {
    double initial_objective = 0.0;
    std::vector<double> objective_per_iter;
    std::size_t iterations = 0;
    bool converged = false;
};

struct SolverResult {
    PowerAllocation alloc;
    SolverTrace trace;
    // Last alpha update and the (beta, zeta) it was solved against.
    AlphaSolution last_alpha;
    std::vector<double> alpha_beta;
    double alpha_zeta = 1.0;
};

/// alpha = Pmax / 2, beta = half of the lead budget left by that alpha,
/// zeta from its closed form (1 when undefined).
PowerAllocation initial_allocation(const PowerProblem& problem);

/// Every subordinate at full power, leads at full power, zeta optimal.
PowerAllocation max_power_allocation(const PowerProblem& problem);

/// Cycles the alpha, beta and zeta updates until the relative objective
/// improvement drops to `tolerance` or `max_iterations` is reached.
SolverResult alternating_minimize(const PowerProblem& problem, const SolverOptions& options = {},
                                  std::optional<PowerAllocation> init = std::nullopt);

/// Residuals of the alpha-subproblem optimality system. Stationarity and
/// subordinate-bound multiplier signs are relative to c1 zeta h sqrt(beta) h';
/// slackness is the relative lead-constraint slack wherever mu > 0.
struct AlphaKktResiduals {
    double stationarity = 0.0;
    double min_bound_multiplier = 0.0;  // must be >= 0
    double min_mu = 0.0;                // must be >= 0
    double slackness = 0.0;
    double primal = 0.0;                // worst relative budget excess
};

AlphaKktResiduals alpha_kkt_residuals(const PowerProblem& problem, const AlphaSolution& solution,
                                      std::span<const double> beta, double zeta);

/// True when every subordinate and lead budget holds exactly and zeta > 0.
bool is_feasible(const PowerProblem& problem, const PowerAllocation& alloc);

/// Rows "round,iter,objective" (no header); iteration 0 is the initial point.
void write_trace_csv(std::ostream& out, std::size_t round, const SolverTrace& trace);

} // namespace airfl
