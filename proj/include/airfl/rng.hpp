#pragma once

#include <cstdint>
#include <random>

namespace airfl {

using Rng = std::mt19937_64;

// Purposes for which independent streams are derived from the master seed.
enum class Stream : std::uint32_t {
    geometry = 1,
    channels = 2,
    noise = 3,
    batching = 4,
    init = 5,
    data = 6,
    partition = 7,
};

/// Derives a stream for (purpose, index) from a master seed. Streams for
/// different purposes or indices are statistically independent and do not
/// depend on how many numbers other streams have consumed.
inline Rng make_stream(std::uint64_t master, Stream purpose, std::uint64_t index = 0)
{
    std::seed_seq seq{
        static_cast<std::uint32_t>(master),
        static_cast<std::uint32_t>(master >> 32),
        static_cast<std::uint32_t>(purpose),
        static_cast<std::uint32_t>(index),
        static_cast<std::uint32_t>(index >> 32),
    };
    return Rng(seq);
}

} // namespace airfl
