#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

#include "airfl/aircomp.hpp"
#include "airfl/types.hpp"

namespace airfl {

/// Weights of the clustering and lead-selection rules.
///   rho  : metres per nat, trades cluster radius against peak data importance
///   rho1 : weight of the lead's distance to the PS
///   rho2 : weight of the lead's data importance (negative favours important data)
struct LinkageParams {
    double rho = 0.0;
    double rho1 = 0.5;
    double rho2 = 0.0;
};

/// Median pairwise device distance divided by log|Y| sets the scale of rho and
/// rho2; rho2 is negative so leads with more informative data win.
LinkageParams default_linkage_params(const Geometry& geometry, std::size_t num_classes);

double median_pairwise_distance(const Geometry& geometry);

/// min over members p of max over members q of dist(p, q).
double minimax_radius(const Geometry& geometry, std::span<const std::size_t> members);

/// minimax_radius + rho * max importance over the members.
double set_objective(const Geometry& geometry, std::span<const double> importances,
                     std::span<const std::size_t> members, double rho);

/// One agglomeration: clusters identified by their smallest device id.
struct MergeStep {
    std::size_t first = 0;
    std::size_t second = 0;
    double linkage = 0.0;
};

struct ClusteringResult {
    std::vector<std::vector<std::size_t>> clusters;  // sorted by smallest member
    std::vector<MergeStep> merges;
};

/// Greedy agglomeration from singletons, merging the pair whose union has the
/// smallest set objective until `num_clusters` remain. Ties go to the pair with
/// the lowest (first, second) smallest-member ids.
ClusteringResult cluster_devices(const Geometry& geometry, std::span<const double> importances,
                                 std::size_t num_clusters, double rho);

/// Per cluster, the member minimising
///   mean distance to the other members + rho1 * distance to PS + rho2 * importance.
/// Ties go to the lowest device id.
std::vector<std::size_t> select_leads(const std::vector<std::vector<std::size_t>>& clusters,
                                      const Geometry& geometry, std::span<const double> importances,
                                      double rho1, double rho2);

/// Score minimised by select_leads for one member of one cluster.
double lead_score(std::span<const std::size_t> cluster, std::size_t member, const Geometry& geometry,
                  std::span<const double> importances, double rho1, double rho2);

double cosine_similarity(std::span<const double> a, std::span<const double> b);

/// Agglomeration that merges the pair whose union keeps the largest minimum
/// pairwise cosine similarity of the devices' gradients.
ClusteringResult cluster_by_similarity(const GradientSet& gradients, std::size_t num_clusters);

ClusterAssignment make_assignment(std::vector<std::vector<std::size_t>> clusters,
                                  std::vector<std::size_t> leads, std::size_t round);

/// Throws unless clusters partition 0..num_devices-1 and each lead is a member.
void validate_assignment(const ClusterAssignment& assignment, std::size_t num_devices);

/// Rows "round,device,cluster,is_lead" (no header).
void write_assignment_csv(std::ostream& out, const ClusterAssignment& assignment);

} // namespace airfl
