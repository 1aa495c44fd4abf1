#pragma once

#include <cstdint>
#include <random>

namespace collapse_lab {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer. Bijective on 64-bit words.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Seed of the independent substream for (master, trial, cell).
///
/// Each coordinate is folded in with its own SplitMix64 round, so substreams
/// that differ in any coordinate get unrelated seeds:
///   seed = mix(mix(mix(master) ^ trial) ^ cell)
/// where mix = splitmix64. The mapping is fixed; changing it changes every
/// shipped output.
constexpr std::uint64_t substream_seed(std::uint64_t master, std::uint64_t trial,
                                       std::uint64_t cell = 0) noexcept {
    return splitmix64(splitmix64(splitmix64(master) ^ trial) ^ cell);
}

inline Rng make_rng(std::uint64_t master, std::uint64_t trial = 0, std::uint64_t cell = 0) {
    return Rng{substream_seed(master, trial, cell)};
}

}  // namespace collapse_lab
