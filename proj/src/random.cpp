#include "hdsa/random.hpp"

namespace hdsa {

Seed derive_seed(Seed parent, std::uint64_t index) {
  std::uint64_t x = parent ^ (0x9E3779B97F4A7C15ULL * (index + 1));
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

Vector standard_normal(Index size, Seed seed) {
  std::mt19937_64 engine(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector out(size);
  for (Index i = 0; i < size; ++i) out[i] = normal(engine);
  return out;
}

Matrix standard_normal(Index rows, Index cols, Seed seed) {
  std::mt19937_64 engine(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix out(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) out(i, j) = normal(engine);
  return out;
}

}  // namespace hdsa
