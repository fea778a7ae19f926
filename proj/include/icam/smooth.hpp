#pragma once

#include <string_view>

#include "icam/tensor.hpp"

namespace icam {

/// Transform from the class logit S^c to the final score Y^c.
enum class SmoothKind { identity, exp, softmax };

std::string_view to_string(SmoothKind kind);
/// Throws ConfigError for unknown names.
SmoothKind parse_smooth(std::string_view name);

/// f(S^c) and its first three derivatives with respect to S^c.
struct SmoothValues {
  double value = 0.0;
  double d1 = 0.0;
  double d2 = 0.0;
  double d3 = 0.0;
};

SmoothValues smooth_identity(double score);
SmoothValues smooth_exp(double score);

/// Y = softmax(logits)[c] with the other logits held fixed:
/// f' = Y(1-Y), f'' = Y(1-3Y+2Y^2), f''' = Y(1-7Y+12Y^2-6Y^3).
SmoothValues smooth_softmax(const Tensor& logits, std::size_t c);

SmoothValues evaluate_smooth(SmoothKind kind, const Tensor& logits, std::size_t c);

/// softmax(logits)[c] after replacing logits[c] with `target_logit`.
double softmax_with_target(const Tensor& logits, std::size_t c, double target_logit);

}  // namespace icam
