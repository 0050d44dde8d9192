#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "vrrae/matrix.hpp"

namespace vrrae {

/// Deterministic random source: std::mt19937_64 (whose output sequence is
/// fixed by the C++ standard) with our own uniform and Box-Muller transforms,
/// so streams are identical across platforms and library versions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller; the spare value is cached.
  double normal();

  /// Uniform index in [0, n) by rejection sampling.
  Index uniform_index(Index n);

  /// Column-major fill; the fill order is part of the determinism contract.
  Matrix normal_matrix(Index rows, Index cols);
  Matrix uniform_matrix(Index rows, Index cols, double lo, double hi);

  /// Seeded Fisher-Yates shuffle.
  void shuffle(std::vector<Index>& v);

 private:
  std::mt19937_64 gen_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Derives an independent stream seed (splitmix64 finalizer over seed ^ salt).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt);

}  // namespace vrrae
