#pragma once

#include <cstddef>
#include <vector>

#include "airfl/rng.hpp"
#include "airfl/types.hpp"

namespace airfl {

/// Large-scale link parameters, all linear.
struct ChannelParams {
    double omega0 = 1.9952623149688786e-4;  // -37 dB reference path gain at 1 m
    double kappa = 3.5;                     // path-loss exponent
    double noise_lead_w = 1e-11;            // -80 dBm
    double noise_ps_w = 1e-11;
};

double db_to_linear(double db);
double dbm_to_watts(double dbm);

/// Links of one cluster for one round. When `virtual_relay` is set the
/// subordinates reach the parameter server directly: the relay hop is an
/// ideal unit-gain, noise-free pass-through.
struct ClusterChannel {
    std::size_t lead = no_device;
    std::vector<std::size_t> subordinates;
    std::vector<double> sub_gain;  // amplitude gain subordinate -> lead
    double lead_gain = 0.0;        // amplitude gain lead -> PS
    double lead_noise = 0.0;       // noise power at the lead (W)
    bool virtual_relay = false;
};

/// Quasi-static channel magnitudes for one round. Immutable once sampled.
struct ChannelRealization {
    std::vector<ClusterChannel> clusters;
    double ps_noise = 0.0;

    std::size_t num_subordinates() const noexcept
    {
        std::size_t n = 0;
        for (const auto& c : clusters) n += c.subordinates.size();
        return n;
    }
};

/// K points uniform in area over the annulus inner <= r <= outer around `ps`.
Geometry sample_ring_geometry(std::size_t count, double inner, double outer, Rng& rng,
                              Point ps = {});

/// Rayleigh amplitude sqrt(omega0 d^-kappa) |h0| with h0 ~ CN(0, 1).
double sample_link_gain(double dist, const ChannelParams& params, Rng& rng);

/// Draws every link of `assignment` for one round.
ChannelRealization sample_channels(const Geometry& geometry, const ClusterAssignment& assignment,
                                   const ChannelParams& params, Rng& rng);

} // namespace airfl
