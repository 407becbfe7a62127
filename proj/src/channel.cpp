#include "airfl/channel.hpp"

#include <cmath>
#include <numbers>

#include "airfl/error.hpp"

namespace airfl {

double db_to_linear(double db)
{
    return std::pow(10.0, db / 10.0);
}

double dbm_to_watts(double dbm)
{
    return std::pow(10.0, (dbm - 30.0) / 10.0);
}

Geometry sample_ring_geometry(std::size_t count, double inner, double outer, Rng& rng, Point ps)
{
    if (!(inner > 0.0) || !(inner < outer)) {
        fail(ErrorKind::invalid_argument, "ring radii must satisfy 0 < inner < outer");
    }
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double a2 = inner * inner;
    const double span = outer * outer - a2;

    Geometry g;
    g.ps = ps;
    g.devices.reserve(count);
    for (std::size_t k = 0; k < count; ++k) {
        const double r = std::sqrt(unit(rng) * span + a2);
        const double theta = 2.0 * std::numbers::pi * unit(rng);
        g.devices.push_back({ps.x + r * std::cos(theta), ps.y + r * std::sin(theta)});
    }
    return g;
}

double sample_link_gain(double dist, const ChannelParams& params, Rng& rng)
{
    if (!(dist > 0.0)) fail(ErrorKind::domain, "degenerate link");
    // Real and imaginary parts of CN(0, 1) each carry variance 1/2.
    std::normal_distribution<double> normal(0.0, std::sqrt(0.5));
    const double re = normal(rng);
    const double im = normal(rng);
    const double path = params.omega0 * std::pow(dist, -params.kappa);
    return std::sqrt(path) * std::hypot(re, im);
}

ChannelRealization sample_channels(const Geometry& geometry, const ClusterAssignment& assignment,
                                   const ChannelParams& params, Rng& rng)
{
    if (!(params.omega0 > 0.0)) fail(ErrorKind::invalid_argument, "omega0 must be positive");
    if (!(params.kappa >= 0.0)) fail(ErrorKind::invalid_argument, "kappa must be non-negative");

    ChannelRealization out;
    out.ps_noise = params.noise_ps_w;
    out.clusters.reserve(assignment.num_clusters());
    for (std::size_t n = 0; n < assignment.num_clusters(); ++n) {
        ClusterChannel c;
        c.subordinates = assignment.subordinates(n);
        c.sub_gain.reserve(c.subordinates.size());
        if (assignment.direct) {
            c.virtual_relay = true;
            c.lead_gain = 1.0;
            c.lead_noise = 0.0;
            for (auto k : c.subordinates) {
                c.sub_gain.push_back(sample_link_gain(distance(geometry.devices[k], geometry.ps), params, rng));
            }
        } else {
            c.lead = assignment.leads[n];
            const Point lead_pos = geometry.devices[c.lead];
            for (auto k : c.subordinates) {
                c.sub_gain.push_back(sample_link_gain(distance(geometry.devices[k], lead_pos), params, rng));
            }
            c.lead_gain = sample_link_gain(distance(lead_pos, geometry.ps), params, rng);
            c.lead_noise = params.noise_lead_w;
        }
        out.clusters.push_back(std::move(c));
    }
    return out;
}

} // namespace airfl
