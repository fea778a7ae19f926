#pragma once

#include <span>
#include <vector>

#include "icam/heatmap.hpp"
#include "icam/tensor.hpp"

namespace icam {

/// Non-negative vector summing to 1 (within 1e-9).
class ProbDist {
 public:
  explicit ProbDist(std::vector<double> values);
  /// Accepts a rank-1 tensor such as a softmax output.
  explicit ProbDist(const Tensor& values);

  std::span<const double> values() const noexcept { return values_; }
  std::size_t size() const noexcept { return values_.size(); }
  double operator[](std::size_t i) const noexcept { return values_[i]; }

 private:
  std::vector<double> values_;
};

inline constexpr double kSsimC1 = 0.01 * 0.01;
inline constexpr double kSsimC2 = 0.03 * 0.03;
inline constexpr double kSvimSigma = 0.15;
/// Lower clamp applied to probabilities inside logarithms.
inline constexpr double kProbFloor = 1e-12;

/// Whole-image SSIM: per-channel global mean, population variance and
/// covariance, averaged over channels. Rank-2 inputs count as one channel.
double ssim(const Tensor& x, const Tensor& y, double c1 = kSsimC1, double c2 = kSsimC2);

/// exp(-(s - 0.5)^2 / (2 sigma^2)).
double svim_from_ssim(double ssim_value, double sigma = kSvimSigma);
double svim(const Tensor& x, const Tensor& y, double sigma = kSvimSigma);

/// sum_k (X_k - Y_k)/2 * ln(X_k / Y_k).
double mdd(const ProbDist& x, const ProbDist& y);
/// 1 - mdd, clamped to [0, 1].
double mds(const ProbDist& x, const ProbDist& y);
/// sum_k X_k ln(X_k / Y_k), natural log, same clamp as mdd.
double kl_divergence(const ProbDist& x, const ProbDist& y);

/// sqrt(SVIM(I, I') * MDS(O, O')).
double perturbation_weight(const Tensor& image, const Tensor& perturbed, const ProbDist& output,
                           const ProbDist& perturbed_output);

/// 1 where h >= frac * max(h). An all-zero map gives an all-zero mask.
BinaryMask threshold_heatmap(const Heatmap& h, double frac = 0.2);

/// |a & b| / |a | b|, 0 for an empty union.
double iou(const BinaryMask& a, const BinaryMask& b);

/// sum(h * bbox) / sum(h), 0 when sum(h) is 0.
double saliency_score(const Heatmap& h, const BinaryMask& bbox);

}  // namespace icam
