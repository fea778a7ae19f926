#include "icam/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "icam/error.hpp"

namespace icam {

BinaryMask BinaryMask::box(std::size_t h, std::size_t w, std::size_t x0, std::size_t y0,
                           std::size_t x1, std::size_t y1) {
  if (x0 > x1 || y0 > y1 || x1 >= w || y1 >= h) {
    throw ConfigError("bounding box outside " + std::to_string(h) + "x" + std::to_string(w) + " grid");
  }
  BinaryMask m(h, w);
  for (std::size_t i = y0; i <= y1; ++i) {
    for (std::size_t j = x0; j <= x1; ++j) m.at(i, j) = 1;
  }
  return m;
}

ProbDist::ProbDist(std::vector<double> values) : values_(std::move(values)) {
  if (values_.empty()) throw ConfigError("probability distribution is empty");
  double total = 0.0;
  for (double v : values_) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError("probability entries must be finite and >= 0");
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw ConfigError("probability distribution sums to " + std::to_string(total));
  }
}

ProbDist::ProbDist(const Tensor& values)
    : ProbDist(std::vector<double>(values.values().begin(), values.values().end())) {}

double ssim(const Tensor& x, const Tensor& y, double c1, double c2) {
  if (x.shape() != y.shape()) {
    throw ShapeError("ssim: shapes " + shape_to_string(x.shape()) + " and " + shape_to_string(y.shape()) +
                     " differ");
  }
  if (x.rank() != 2 && x.rank() != 3) throw ShapeError("ssim: expected an [H,W] or [C,H,W] image");
  const std::size_t channels = x.rank() == 3 ? x.dim(0) : 1;
  const std::size_t n = x.size() / channels;
  if (n == 0) throw ShapeError("ssim: empty image");
  const double inv_n = 1.0 / static_cast<double>(n);

  double total = 0.0;
  for (std::size_t c = 0; c < channels; ++c) {
    const double* a = x.data() + c * n;
    const double* b = y.data() + c * n;
    double mu_x = 0.0, mu_y = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      mu_x += a[i];
      mu_y += b[i];
    }
    mu_x *= inv_n;
    mu_y *= inv_n;
    double var_x = 0.0, var_y = 0.0, cov = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double dx = a[i] - mu_x;
      const double dy = b[i] - mu_y;
      var_x += dx * dx;
      var_y += dy * dy;
      cov += dx * dy;
    }
    var_x *= inv_n;
    var_y *= inv_n;
    cov *= inv_n;
    const double num = (2.0 * mu_x * mu_y + c1) * (2.0 * cov + c2);
    const double den = (mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2);
    total += num / den;
  }
  return total / static_cast<double>(channels);
}

double svim_from_ssim(double ssim_value, double sigma) {
  if (!(sigma > 0.0)) throw ConfigError("svim sigma must be positive");
  const double d = ssim_value - 0.5;
  return std::exp(-(d * d) / (2.0 * sigma * sigma));
}

double svim(const Tensor& x, const Tensor& y, double sigma) {
  if (!(sigma > 0.0)) throw ConfigError("svim sigma must be positive");
  return svim_from_ssim(ssim(x, y), sigma);
}

namespace {

void require_same_length(const ProbDist& x, const ProbDist& y) {
  if (x.size() != y.size()) {
    throw ShapeError("distributions have lengths " + std::to_string(x.size()) + " and " +
                     std::to_string(y.size()));
  }
}

double clamp_prob(double p) { return std::clamp(p, kProbFloor, 1.0); }

}  // namespace

double mdd(const ProbDist& x, const ProbDist& y) {
  require_same_length(x, y);
  double total = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double weight = (x[k] - y[k]) / 2.0;
    total += weight * std::log(clamp_prob(x[k]) / clamp_prob(y[k]));
  }
  return total;
}

double mds(const ProbDist& x, const ProbDist& y) { return std::clamp(1.0 - mdd(x, y), 0.0, 1.0); }

double kl_divergence(const ProbDist& x, const ProbDist& y) {
  require_same_length(x, y);
  double total = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    total += x[k] * std::log(clamp_prob(x[k]) / clamp_prob(y[k]));
  }
  return total;
}

double perturbation_weight(const Tensor& image, const Tensor& perturbed, const ProbDist& output,
                           const ProbDist& perturbed_output) {
  return std::sqrt(svim(image, perturbed) * mds(output, perturbed_output));
}

BinaryMask threshold_heatmap(const Heatmap& h, double frac) {
  if (!(frac > 0.0 && frac < 1.0)) throw ConfigError("threshold fraction must be in (0, 1)");
  BinaryMask mask(h.height, h.width);
  if (h.values.empty()) return mask;
  const double peak = *std::max_element(h.values.begin(), h.values.end());
  if (!(peak > 0.0)) return mask;
  const double cut = frac * peak;
  for (std::size_t i = 0; i < h.values.size(); ++i) mask.cells[i] = h.values[i] >= cut ? 1 : 0;
  return mask;
}

double iou(const BinaryMask& a, const BinaryMask& b) {
  if (a.height != b.height || a.width != b.width) throw ShapeError("iou: mask shapes differ");
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.cells.size(); ++i) {
    inter += (a.cells[i] & b.cells[i]);
    uni += (a.cells[i] | b.cells[i]);
  }
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

double saliency_score(const Heatmap& h, const BinaryMask& bbox) {
  if (h.height != bbox.height || h.width != bbox.width) {
    throw ShapeError("saliency_score: heatmap and box shapes differ");
  }
  double inside = 0.0, total = 0.0;
  for (std::size_t i = 0; i < h.values.size(); ++i) {
    total += h.values[i];
    if (bbox.cells[i] != 0) inside += h.values[i];
  }
  return total == 0.0 ? 0.0 : inside / total;
}

}  // namespace icam
