#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

namespace airfl {

struct Point {
    double x = 0.0;
    double y = 0.0;
};

inline double distance(Point a, Point b)
{
    return std::hypot(a.x - b.x, a.y - b.y);
}

/// Device and parameter-server positions in metres.
struct Geometry {
    std::vector<Point> devices;
    Point ps{};

    std::size_t size() const noexcept { return devices.size(); }
};

inline constexpr std::size_t no_device = std::numeric_limits<std::size_t>::max();

/// Partition of devices into clusters with one lead per cluster.
///
/// In direct mode there is a single cluster holding every device and no lead:
/// all devices transmit straight to the parameter server.
struct ClusterAssignment {
    std::vector<std::vector<std::size_t>> clusters;  // members sorted ascending
    std::vector<std::size_t> leads;                  // leads[n] is in clusters[n]
    std::size_t round = 0;
    bool direct = false;

    std::size_t num_clusters() const noexcept { return clusters.size(); }

    /// Members of cluster n other than its lead.
    std::vector<std::size_t> subordinates(std::size_t n) const
    {
        std::vector<std::size_t> out;
        for (auto d : clusters[n]) {
            if (direct || d != leads[n]) out.push_back(d);
        }
        return out;
    }

    /// Number of physical relays (zero in direct mode).
    std::size_t num_leads() const noexcept { return direct ? 0 : leads.size(); }
};

/// Direct single-tier topology over K devices.
inline ClusterAssignment direct_assignment(std::size_t num_devices)
{
    ClusterAssignment a;
    a.direct = true;
    a.clusters.emplace_back();
    for (std::size_t k = 0; k < num_devices; ++k) a.clusters[0].push_back(k);
    a.leads.push_back(no_device);
    return a;
}

} // namespace airfl
