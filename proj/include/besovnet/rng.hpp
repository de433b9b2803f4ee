#pragma once

#include <cstdint>
#include <random>

namespace besovnet {

using Rng = std::mt19937_64;

/// Independent child seed for stream `stream` of `seed` (splitmix64 finalizer).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace besovnet
