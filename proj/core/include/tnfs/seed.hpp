#pragma once

#include <cstdint>
#include <string_view>

namespace tnfs {

// Stream seed for one stochastic stage: a splitmix64 mix of the master seed
// and a 64-bit FNV-1a hash of the stage label. Identical inputs always give
// identical seeds on every platform.
std::uint64_t derive_seed(std::uint64_t master, std::string_view label);

std::uint64_t fnv1a64(std::string_view text);

}  // namespace tnfs
