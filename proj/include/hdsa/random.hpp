#pragma once

#include "hdsa/types.hpp"

#include <cstdint>
#include <random>

namespace hdsa {

/// Seed carried explicitly by every sampler; samplers hold no RNG state.
using Seed = std::uint64_t;

/// Derives an independent child seed from (parent, index). Deterministic and
/// platform independent (splitmix64 finalizer).
Seed derive_seed(Seed parent, std::uint64_t index);

/// Standard normal vector of the given length drawn from a generator seeded by `seed`.
Vector standard_normal(Index size, Seed seed);

/// Standard normal matrix, column-major fill order.
Matrix standard_normal(Index rows, Index cols, Seed seed);

}  // namespace hdsa
