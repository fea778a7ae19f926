#pragma once

#include <cstdint>
#include <vector>

#include "icam/prng.hpp"
#include "icam/tensor.hpp"

namespace icam {

struct PerturbationConfig {
  std::size_t n = 8;
  double alpha = 0.4;
  std::uint64_t seed = 42;

  /// Throws ConfigError unless n >= 1 and alpha is in [0, 1].
  void validate() const;
};

struct PerturbationSet {
  Tensor original;
  std::vector<Tensor> images;
};

/// (I + alpha * N) masked per pixel. All C*H*W noise values are drawn first
/// (row-major), then one Bernoulli(1 - alpha) draw per spatial position,
/// shared across channels. No clamping.
Tensor perturb_image(const Tensor& image, double alpha, Prng& rng);

/// n perturbations from one Prng stream seeded with config.seed.
PerturbationSet generate_set(const Tensor& image, const PerturbationConfig& config);

}  // namespace icam
