#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string_view>

namespace demandsg {

using Rng = std::mt19937_64;

// Seeds for independent subsystems are derived from one master seed and a
// fixed label, so a subsystem's stream never depends on call order.
std::uint64_t derive_seed(std::uint64_t master, std::string_view label);
std::uint64_t derive_seed(std::uint64_t master, std::string_view label,
                          std::uint64_t index);

// Uniform index in [0, n).
inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

}  // namespace demandsg
