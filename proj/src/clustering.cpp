#include "airfl/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

#include "airfl/error.hpp"

namespace airfl {

namespace {

constexpr double inf = std::numeric_limits<double>::infinity();

// Slot-indexed agglomeration state. A cluster lives in the slot equal to its
// smallest member id, so slot order is the tie-break order.
struct Agglomeration {
    std::vector<std::vector<std::size_t>> members;
    std::vector<bool> active;

    explicit Agglomeration(std::size_t n) : members(n), active(n, true)
    {
        for (std::size_t i = 0; i < n; ++i) members[i] = {i};
    }

    std::vector<std::size_t> united(std::size_t a, std::size_t b) const
    {
        std::vector<std::size_t> u;
        u.reserve(members[a].size() + members[b].size());
        std::merge(members[a].begin(), members[a].end(), members[b].begin(), members[b].end(),
                   std::back_inserter(u));
        return u;
    }

    void merge(std::size_t a, std::size_t b)
    {
        members[a] = united(a, b);
        members[b].clear();
        active[b] = false;
    }

    std::vector<std::vector<std::size_t>> result() const
    {
        std::vector<std::vector<std::size_t>> out;
        for (std::size_t i = 0; i < members.size(); ++i) {
            if (active[i]) out.push_back(members[i]);
        }
        return out;
    }
};

void check_counts(std::size_t num_devices, std::size_t num_clusters)
{
    if (num_clusters < 1) fail(ErrorKind::invalid_argument, "need at least one cluster");
    if (num_clusters > num_devices) fail(ErrorKind::invalid_argument, "more clusters than devices");
}

} // namespace

double median_pairwise_distance(const Geometry& geometry)
{
    std::vector<double> d;
    const auto n = geometry.size();
    d.reserve(n * (n - 1) / 2);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) d.push_back(distance(geometry.devices[i], geometry.devices[j]));
    }
    if (d.empty()) return 0.0;
    const auto mid = d.size() / 2;
    std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(mid), d.end());
    if (d.size() % 2 == 1) return d[mid];
    const double upper = d[mid];
    const double lower = *std::max_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lower + upper);
}

LinkageParams default_linkage_params(const Geometry& geometry, std::size_t num_classes)
{
    const double scale = median_pairwise_distance(geometry) / std::log(static_cast<double>(std::max<std::size_t>(num_classes, 2)));
    return {scale, 0.5, -scale};
}

double minimax_radius(const Geometry& geometry, std::span<const std::size_t> members)
{
    if (members.empty()) fail(ErrorKind::invalid_argument, "empty set");
    double best = inf;
    for (auto p : members) {
        double worst = 0.0;
        for (auto q : members) worst = std::max(worst, distance(geometry.devices[p], geometry.devices[q]));
        best = std::min(best, worst);
    }
    return best;
}

double set_objective(const Geometry& geometry, std::span<const double> importances,
                     std::span<const std::size_t> members, double rho)
{
    const double r = minimax_radius(geometry, members);
    double peak = -inf;
    for (auto p : members) peak = std::max(peak, importances[p]);
    return r + rho * peak;
}

ClusteringResult cluster_devices(const Geometry& geometry, std::span<const double> importances,
                                 std::size_t num_clusters, double rho)
{
    const auto n = geometry.size();
    check_counts(n, num_clusters);
    if (importances.size() != n) fail(ErrorKind::invalid_argument, "one importance per device required");

    Agglomeration agg(n);
    // link[i][j] (i < j) caches obj(cluster_i U cluster_j); only pairs touching
    // the merged slot change after a merge.
    std::vector<std::vector<double>> link(n, std::vector<double>(n, inf));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const std::size_t pair[2] = {i, j};
            link[i][j] = set_objective(geometry, importances, pair, rho);
        }
    }

    ClusteringResult out;
    for (std::size_t remaining = n; remaining > num_clusters; --remaining) {
        std::size_t best_i = 0;
        std::size_t best_j = 0;
        double best = inf;
        for (std::size_t i = 0; i < n; ++i) {
            if (!agg.active[i]) continue;
            for (std::size_t j = i + 1; j < n; ++j) {
                if (agg.active[j] && link[i][j] < best) {
                    best = link[i][j];
                    best_i = i;
                    best_j = j;
                }
            }
        }
        agg.merge(best_i, best_j);
        out.merges.push_back({best_i, best_j, best});
        for (std::size_t x = 0; x < n; ++x) {
            if (!agg.active[x] || x == best_i) continue;
            const auto a = std::min(x, best_i);
            const auto b = std::max(x, best_i);
            link[a][b] = set_objective(geometry, importances, agg.united(a, b), rho);
        }
    }
    out.clusters = agg.result();
    return out;
}

double lead_score(std::span<const std::size_t> cluster, std::size_t member, const Geometry& geometry,
                  std::span<const double> importances, double rho1, double rho2)
{
    double mean_dist = 0.0;
    if (cluster.size() > 1) {
        for (auto other : cluster) {
            if (other != member) mean_dist += distance(geometry.devices[member], geometry.devices[other]);
        }
        mean_dist /= static_cast<double>(cluster.size() - 1);
    }
    const double to_ps = distance(geometry.devices[member], geometry.ps);
    return mean_dist + rho1 * to_ps + rho2 * importances[member];
}

std::vector<std::size_t> select_leads(const std::vector<std::vector<std::size_t>>& clusters,
                                      const Geometry& geometry, std::span<const double> importances,
                                      double rho1, double rho2)
{
    std::vector<std::size_t> leads;
    leads.reserve(clusters.size());
    for (const auto& c : clusters) {
        if (c.empty()) fail(ErrorKind::invalid_argument, "empty cluster");
        std::size_t best = no_device;
        double best_score = inf;
        for (auto m : c) {
            const double s = lead_score(c, m, geometry, importances, rho1, rho2);
            if (s < best_score || (s == best_score && m < best)) {
                best_score = s;
                best = m;
            }
        }
        leads.push_back(best);
    }
    return leads;
}

double cosine_similarity(std::span<const double> a, std::span<const double> b)
{
    if (a.size() != b.size()) fail(ErrorKind::invalid_argument, "vector lengths differ");
    double ab = 0.0;
    double aa = 0.0;
    double bb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ab += a[i] * b[i];
        aa += a[i] * a[i];
        bb += b[i] * b[i];
    }
    if (aa == 0.0 || bb == 0.0) return 0.0;
    return ab / std::sqrt(aa * bb);
}

ClusteringResult cluster_by_similarity(const GradientSet& gradients, std::size_t num_clusters)
{
    const auto n = gradients.size();
    check_counts(n, num_clusters);

    // cross[i][j]: minimum similarity between members of slots i and j.
    std::vector<std::vector<double>> cross(n, std::vector<double>(n, inf));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            cross[i][j] = cross[j][i] = cosine_similarity(gradients[i], gradients[j]);
        }
    }
    std::vector<double> intra(n, inf);

    Agglomeration agg(n);
    ClusteringResult out;
    for (std::size_t remaining = n; remaining > num_clusters; --remaining) {
        std::size_t best_i = 0;
        std::size_t best_j = 0;
        double best = -inf;
        for (std::size_t i = 0; i < n; ++i) {
            if (!agg.active[i]) continue;
            for (std::size_t j = i + 1; j < n; ++j) {
                if (!agg.active[j]) continue;
                const double score = std::min({intra[i], intra[j], cross[i][j]});
                if (score > best) {
                    best = score;
                    best_i = i;
                    best_j = j;
                }
            }
        }
        intra[best_i] = best;
        for (std::size_t x = 0; x < n; ++x) {
            if (!agg.active[x] || x == best_i || x == best_j) continue;
            cross[best_i][x] = cross[x][best_i] = std::min(cross[best_i][x], cross[best_j][x]);
        }
        agg.merge(best_i, best_j);
        out.merges.push_back({best_i, best_j, best});
    }
    out.clusters = agg.result();
    return out;
}

ClusterAssignment make_assignment(std::vector<std::vector<std::size_t>> clusters,
                                  std::vector<std::size_t> leads, std::size_t round)
{
    ClusterAssignment a;
    a.clusters = std::move(clusters);
    a.leads = std::move(leads);
    a.round = round;
    return a;
}

void validate_assignment(const ClusterAssignment& assignment, std::size_t num_devices)
{
    std::vector<int> seen(num_devices, 0);
    for (const auto& c : assignment.clusters) {
        if (c.empty()) fail(ErrorKind::invalid_argument, "empty cluster");
        for (auto d : c) {
            if (d >= num_devices) fail(ErrorKind::invalid_argument, "device id out of range");
            ++seen[d];
        }
    }
    if (std::any_of(seen.begin(), seen.end(), [](int s) { return s != 1; })) {
        fail(ErrorKind::invalid_argument, "clusters do not partition the devices");
    }
    if (assignment.direct) return;
    if (assignment.leads.size() != assignment.clusters.size()) {
        fail(ErrorKind::invalid_argument, "one lead per cluster required");
    }
    for (std::size_t n = 0; n < assignment.clusters.size(); ++n) {
        const auto& c = assignment.clusters[n];
        if (!std::binary_search(c.begin(), c.end(), assignment.leads[n])) {
            fail(ErrorKind::invalid_argument, "lead is not a member of its cluster");
        }
    }
}

void write_assignment_csv(std::ostream& out, const ClusterAssignment& assignment)
{
    for (std::size_t n = 0; n < assignment.clusters.size(); ++n) {
        for (auto d : assignment.clusters[n]) {
            const bool lead = !assignment.direct && d == assignment.leads[n];
            out << assignment.round << ',' << d << ',' << n << ',' << (lead ? 1 : 0) << '\n';
        }
    }
}

} // namespace airfl
