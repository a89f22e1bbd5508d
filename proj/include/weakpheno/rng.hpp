#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace weakpheno {

using Rng = std::mt19937_64;

/// Mixes a base seed with a stream index so that independent work units
/// (replicates, dropout repetitions, labels) get decorrelated generators
/// regardless of the order in which they run.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);
std::uint64_t derive_seed(std::uint64_t base, std::string_view tag);

inline Rng make_rng(std::uint64_t seed) { return Rng(seed); }

}  // namespace weakpheno
