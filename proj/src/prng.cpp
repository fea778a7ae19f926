#include "icam/prng.hpp"

#include <cmath>
#include <numbers>

namespace icam {

std::uint64_t Prng::next() noexcept {
  state_ += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = state_;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double Prng::uniform() noexcept {
  return static_cast<double>(next() >> 11) * 0x1.0p-53;
}

double Prng::gaussian() noexcept {
  if (spare_) {
    const double z1 = *spare_;
    spare_.reset();
    return z1;
  }
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();        // [0, 1)
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_ = radius * std::sin(angle);
  return radius * std::cos(angle);
}

}  // namespace icam
