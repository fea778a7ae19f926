#pragma once

#include <cstdint>
#include <optional>

namespace icam {

/// SplitMix64 stream with uniform and Box-Muller Gaussian draws.
///
/// The draw sequence is fully determined by the seed: uniform() is
/// (next() >> 11) * 2^-53 and gaussian() produces Box-Muller pairs
/// from (u1 = 1 - uniform(), u2 = uniform()), returning the cosine
/// branch first and the sine branch on the following call.
class Prng {
 public:
  explicit Prng(std::uint64_t seed) noexcept : state_(seed) {}

  std::uint64_t next() noexcept;
  /// In [0, 1).
  double uniform() noexcept;
  /// Standard normal.
  double gaussian() noexcept;
  /// 1 with probability p (uniform() < p), else 0.
  bool bernoulli(double p) noexcept { return uniform() < p; }

 private:
  std::uint64_t state_;
  std::optional<double> spare_;
};

}  // namespace icam
