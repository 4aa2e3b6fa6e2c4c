#pragma once

#include <cstdint>
#include <random>

namespace beamtrack {

using Rng = std::mt19937_64;

// Independent stream for (seed, stream index); depends on nothing else.
inline Rng make_stream(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                      0x9e3779b9u};
    return Rng(seq);
}

} // namespace beamtrack
