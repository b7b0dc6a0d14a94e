#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace srfilter {

using Rng = std::mt19937_64;

std::uint64_t splitmix64(std::uint64_t x);

// Independent stream seed for (master seed, repeat index, stage name).
// seed = splitmix64(splitmix64(master ^ splitmix64(index)) ^ fnv1a64(stage))
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index, std::string_view stage);

} // namespace srfilter
