#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "airfl/aircomp.hpp"
#include "airfl/core_model.hpp"
#include "airfl/power_opt.hpp"
#include "airfl/types.hpp"

namespace test {

airfl::Dataset tiny_blobs(std::size_t classes, std::size_t dim, std::size_t samples, std::uint64_t seed = 1);
airfl::Shard all_indices(const airfl::Dataset& data);

std::string temp_dir(const std::string& tag);
void write_bytes(const std::string& path, const std::vector<unsigned char>& bytes);
std::string read_file(const std::string& path);

/// Random gradients with per-device offsets and scales.
airfl::GradientSet random_gradients(std::size_t devices, std::size_t dim, airfl::Rng& rng);

struct PowerInstance {
    airfl::Geometry geometry;
    airfl::ClusterAssignment assignment;
    airfl::GradientSet gradients;
    airfl::GradientStats stats;
    airfl::PowerProblem problem;
};

/// Ring geometry, distance clustering, Rayleigh channels at the reference
/// path loss and -80 dBm noise, coefficients from random gradients.
PowerInstance random_power_instance(std::uint64_t seed, std::size_t devices, std::size_t clusters,
                                    std::size_t dim = 20, double pmax = 0.2);

namespace oracle {

/// Objective evaluated from scratch in the (alpha, beta, zeta) variables.
double objective(const airfl::PowerProblem& p, const airfl::PowerAllocation& a);

/// Euclidean projection onto {0 <= u <= upper} intersected with {||u|| <= radius}
/// by Dykstra's alternating projections.
std::vector<double> project_box_ball(const std::vector<double>& point, const std::vector<double>& upper,
                                     double radius);

/// Exact minimisation of one block with the others held fixed, each by
/// projected gradient on the block's own feasible set.
void optimize_alpha(const airfl::PowerProblem& p, airfl::PowerAllocation& a);
void optimize_beta(const airfl::PowerProblem& p, airfl::PowerAllocation& a);
void optimize_zeta(const airfl::PowerProblem& p, airfl::PowerAllocation& a);

/// alpha = Pmax / 2, beta = half the lead budget, zeta minimised.
airfl::PowerAllocation starting_point(const airfl::PowerProblem& p);

struct BlockResult {
    airfl::PowerAllocation alloc;
    double objective = 0.0;
    std::size_t sweeps = 0;
};

/// Block coordinate descent where each block (alpha per cluster, beta per
/// cluster, zeta) is minimised by projected gradient iterations on its own
/// constraint set. Stops when a sweep improves the objective by less than
/// `tol` relative, or after `max_sweeps`.
BlockResult block_projected_gradient(const airfl::PowerProblem& p, std::size_t max_sweeps, double tol);

/// obj(S) = minimax radius + rho * max importance for every subset bitmask of
/// up to 20 devices, computed independently of the library.
std::vector<double> subset_objectives(const airfl::Geometry& g, const std::vector<double>& importance, double rho);

struct GreedyTrace {
    std::vector<std::uint32_t> clusters;  // bitmasks
    std::vector<double> linkage;          // value of each merge
};

/// Greedy agglomeration driven only by the subset table.
GreedyTrace greedy_from_table(const std::vector<double>& table, std::size_t devices, std::size_t clusters);

} // namespace oracle

} // namespace test
