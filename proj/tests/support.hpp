#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>

#include "icam/prng.hpp"
#include "icam/tensor.hpp"

namespace test {

inline icam::Tensor random_tensor(const icam::Shape& shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  icam::Prng rng(seed);
  icam::Tensor t(shape);
  for (double& v : t.values()) v = lo + (hi - lo) * rng.uniform();
  return t;
}

inline double rel_err(double a, double b) {
  const double s = std::max(std::abs(a), std::abs(b));
  return s == 0.0 ? 0.0 : std::abs(a - b) / s;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& name)
      : path_(std::filesystem::temp_directory_path() / ("icam_test_" + name)) {
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& leaf) const { return path_ / leaf; }

 private:
  std::filesystem::path path_;
};

}  // namespace test

#include "icam/heatmap.hpp"

namespace test {

/// Four-corner form of half-pixel bilinear interpolation, edge-clamped.
inline icam::Heatmap naive_bilinear(const icam::Heatmap& h, std::size_t oh, std::size_t ow) {
  icam::Heatmap out(oh, ow);
  auto coord = [](std::size_t o, std::size_t n_out, std::size_t n_in, std::size_t& i0, std::size_t& i1, double& f) {
    double s = (o + 0.5) * double(n_in) / double(n_out) - 0.5;
    s = std::min(std::max(s, 0.0), double(n_in - 1));
    i0 = std::size_t(s);
    i1 = std::min(i0 + 1, n_in - 1);
    f = s - double(i0);
  };
  for (std::size_t y = 0; y < oh; ++y) {
    for (std::size_t x = 0; x < ow; ++x) {
      std::size_t y0, y1, x0, x1;
      double fy, fx;
      coord(y, oh, h.height, y0, y1, fy);
      coord(x, ow, h.width, x0, x1, fx);
      out.at(y, x) = (1 - fy) * (1 - fx) * h.at(y0, x0) + (1 - fy) * fx * h.at(y0, x1) +
                     fy * (1 - fx) * h.at(y1, x0) + fy * fx * h.at(y1, x1);
    }
  }
  return out;
}

inline icam::Heatmap naive_minmax(const icam::Heatmap& h) {
  double lo = h.values[0], hi = h.values[0];
  for (double v : h.values) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  icam::Heatmap out = h;
  for (double& v : out.values) v = hi > lo ? (v - lo) / (hi - lo) : 0.0;
  return out;
}

}  // namespace test
