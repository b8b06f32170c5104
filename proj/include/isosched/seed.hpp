#pragma once

#include <cstdint>
#include <string_view>

namespace isosched {

/// splitmix64 finalizer.
std::uint64_t mix64(std::uint64_t z);

/// Stable per-component seed: FNV-1a of the label folded into the global seed.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view label);

}  // namespace isosched
