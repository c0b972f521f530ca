#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace sparse_isi {

// splitmix64 finalizer
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Order-sensitive combination of seed components.
constexpr std::uint64_t derive_seed(std::initializer_list<std::uint64_t> parts) noexcept {
    std::uint64_t h = 0x2545F4914F6CDD1DULL;
    for (auto p : parts) h = mix64(h ^ mix64(p));
    return h;
}

using Rng = std::mt19937_64;

}  // namespace sparse_isi
