#pragma once

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include "wmfrec/types.hpp"

namespace wmfrec {

/// Seeded generator whose derived draws (integers, uniforms, normals,
/// shuffles) are defined here rather than by the standard library's
/// distributions, so a seed reproduces the same stream on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform();

  /// Uniform integer in [0, n). Requires n > 0.
  Index below(Index n);

  /// Standard normal draw (Box-Muller).
  double normal();

  template <class T>
  void shuffle(std::vector<T>& values) {
    for (Index i = static_cast<Index>(values.size()) - 1; i > 0; --i) {
      std::swap(values[static_cast<std::size_t>(i)],
                values[static_cast<std::size_t>(below(i + 1))]);
    }
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// splitmix64 finalizer; derives independent sub-seeds from one run seed.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) noexcept;

}  // namespace wmfrec
