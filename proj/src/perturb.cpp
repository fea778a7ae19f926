#include "icam/perturb.hpp"

#include <string>

#include "icam/error.hpp"

namespace icam {

void PerturbationConfig::validate() const {
  if (n < 1) throw ConfigError("perturbation count must be at least 1");
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw ConfigError("perturbation alpha must be in [0, 1], got " + std::to_string(alpha));
  }
}

Tensor perturb_image(const Tensor& image, double alpha, Prng& rng) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw ConfigError("perturbation alpha must be in [0, 1], got " + std::to_string(alpha));
  }
  require_rank(image, 3, "perturb_image input");
  const std::size_t channels = image.dim(0);
  const std::size_t area = image.dim(1) * image.dim(2);

  Tensor out(image.shape());
  for (std::size_t i = 0; i < image.size(); ++i) out[i] = image[i] + alpha * rng.gaussian();

  const double keep = 1.0 - alpha;
  for (std::size_t p = 0; p < area; ++p) {
    if (rng.bernoulli(keep)) continue;
    for (std::size_t c = 0; c < channels; ++c) out[c * area + p] = 0.0;
  }
  return out;
}

PerturbationSet generate_set(const Tensor& image, const PerturbationConfig& config) {
  config.validate();
  Prng rng(config.seed);
  PerturbationSet set{image, {}};
  set.images.reserve(config.n);
  for (std::size_t i = 0; i < config.n; ++i) set.images.push_back(perturb_image(image, config.alpha, rng));
  return set;
}

}  // namespace icam
