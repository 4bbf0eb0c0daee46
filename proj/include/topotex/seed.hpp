#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <utility>
#include <vector>

namespace topotex {

/// Derives an independent 64-bit seed from a master seed, a purpose string
/// and an index. Stable across platforms and runs.
std::uint64_t derive_seed(std::uint64_t master, std::string_view purpose, std::uint64_t index = 0);

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view text);

// Draws with fixed algorithms, so results do not depend on the standard
// library's distribution implementations.
using Rng = std::mt19937_64;

/// Uniform in the open interval (0, 1).
double uniform_open(Rng& rng);
/// Uniform integer in [0, n), n > 0.
std::uint64_t uniform_below(Rng& rng, std::uint64_t n);
/// Standard normal (Box-Muller).
double standard_normal(Rng& rng);

template <class T>
void shuffle(std::vector<T>& v, Rng& rng) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[uniform_below(rng, i)]);
}

}  // namespace topotex
