#include "icam/smooth.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "icam/error.hpp"

namespace icam {

std::string_view to_string(SmoothKind kind) {
  switch (kind) {
    case SmoothKind::identity: return "identity";
    case SmoothKind::exp: return "exp";
    case SmoothKind::softmax: return "softmax";
  }
  return "unknown";
}

SmoothKind parse_smooth(std::string_view name) {
  if (name == "identity") return SmoothKind::identity;
  if (name == "exp") return SmoothKind::exp;
  if (name == "softmax") return SmoothKind::softmax;
  throw ConfigError("unknown smooth function '" + std::string(name) + "'");
}

SmoothValues smooth_identity(double score) { return {score, 1.0, 0.0, 0.0}; }

SmoothValues smooth_exp(double score) {
  const double e = std::exp(score);
  return {e, e, e, e};
}

double softmax_with_target(const Tensor& logits, std::size_t c, double target_logit) {
  require_rank(logits, 1, "softmax logits");
  if (c >= logits.size()) throw ConfigError("class index out of range");
  double peak = target_logit;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (i != c) peak = std::max(peak, logits[i]);
  }
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    total += std::exp((i == c ? target_logit : logits[i]) - peak);
  }
  return std::exp(target_logit - peak) / total;
}

SmoothValues smooth_softmax(const Tensor& logits, std::size_t c) {
  if (c >= logits.size()) throw ConfigError("class index out of range");
  const double y = softmax_with_target(logits, c, logits[c]);
  const double y2 = y * y;
  const double y3 = y2 * y;
  return {y, y * (1.0 - y), y * (1.0 - 3.0 * y + 2.0 * y2), y * (1.0 - 7.0 * y + 12.0 * y2 - 6.0 * y3)};
}

SmoothValues evaluate_smooth(SmoothKind kind, const Tensor& logits, std::size_t c) {
  if (c >= logits.size()) throw ConfigError("class index out of range");
  switch (kind) {
    case SmoothKind::identity: return smooth_identity(logits[c]);
    case SmoothKind::exp: return smooth_exp(logits[c]);
    case SmoothKind::softmax: return smooth_softmax(logits, c);
  }
  throw ConfigError("unknown smooth function");
}

}  // namespace icam
