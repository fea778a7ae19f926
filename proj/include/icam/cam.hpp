#pragma once

// Class activation maps: Grad-CAM, Grad-CAM++, LayerCAM and I-CAM.
//
// Every map function takes a logit-kind ForwardTrace, so the stored layer
// gradient is g = dS^c/dA. The smooth function Y^c = f(S^c) enters through
// its analytic derivatives: dY/dA = f'(S^c) g, d2Y/dA2 = f''(S^c) g^2,
// d3Y/dA3 = f'''(S^c) g^3. This holds exactly when the layers after the
// scoring point are linear in A (true for the final block of a GAP + linear
// head) and piecewise otherwise.
//
// Maps come back at the layer's own resolution with ReLU applied and no
// normalisation; fuse() upsamples, normalises and combines them.

#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "icam/heatmap.hpp"
#include "icam/layer_score.hpp"
#include "icam/model.hpp"
#include "icam/smooth.hpp"

namespace icam {

enum class CamMethod { gradcam, gradcampp, layercam, icam };
enum class BiasMode { none, channel, spatial };

/// How the channel bias combines the layer weights with the activations.
/// product_of_sums: S^c - (sum_ij w)(sum_ij A)   (as printed)
/// sum_of_products: S^c - sum_ij (w * A)
enum class ChannelBiasForm { product_of_sums, sum_of_products };

std::string_view to_string(CamMethod method);
std::string_view to_string(BiasMode mode);
CamMethod parse_method(std::string_view name);
BiasMode parse_bias(std::string_view name);

/// Default smooth per method: identity for gradcam and layercam, exp for
/// gradcampp, softmax for icam.
SmoothKind default_smooth(CamMethod method);

struct CamRequest {
  CamMethod method = CamMethod::icam;
  SmoothKind smooth = SmoothKind::softmax;
  BiasMode bias = BiasMode::channel;
  ChannelBiasForm channel_form = ChannelBiasForm::product_of_sums;
  /// Empty: automatic (icam via layer scoring, gradcam/gradcampp the final
  /// scoring point, layercam every scoring point with equal weights).
  std::vector<std::string> layers;

  static CamRequest for_method(CamMethod method);
};

/// Relative cancellation guard for the alpha denominator.
inline constexpr double kAlphaStabilizer = 1e-8;

/// Grad-CAM channel weights (1/N) sum_ij f'(S^c) g_ij.
std::vector<double> gradcam_channel_weights(const ForwardTrace& trace, std::string_view layer,
                                            SmoothKind smooth = SmoothKind::identity);
Heatmap gradcam_map(const ForwardTrace& trace, std::string_view layer, SmoothKind smooth = SmoothKind::identity);

/// alpha_kij = f'' g^2 / (2 f'' g^2 + f''' sum_ij(A_k g^3)), zero where the
/// denominator cancels to within kAlphaStabilizer of its terms.
Tensor generalized_alpha(double f2, double f3, const Tensor& gradient, const Tensor& activation);

/// Grad-CAM++ channel weights sum_ij alpha * relu(f' g), raw alpha.
std::vector<double> gradcampp_channel_weights(const ForwardTrace& trace, std::string_view layer,
                                              SmoothKind smooth = SmoothKind::exp);
Heatmap gradcampp_map(const ForwardTrace& trace, std::string_view layer, SmoothKind smooth = SmoothKind::exp);

Heatmap layercam_map(const ForwardTrace& trace, std::string_view layer, SmoothKind smooth = SmoothKind::identity);

/// tanh(alpha) * relu(f' g), elementwise.
Tensor icam_weights(const Tensor& alpha, double f1, const Tensor& gradient);

/// One value per channel.
std::vector<double> channel_bias(double score, const Tensor& weights, const Tensor& activation,
                                 ChannelBiasForm form = ChannelBiasForm::product_of_sums);
/// S^c - w_kij * sum_ij A_k, same shape as the activation.
Tensor spatial_bias(double score, const Tensor& weights, const Tensor& activation);

/// relu(sum_k w_k * A_k + bias). Channel bias adds sum_k b_k everywhere;
/// spatial bias adds sum_k b_kij per pixel.
Heatmap icam_layer_map(const ForwardTrace& trace, std::string_view layer, SmoothKind smooth = SmoothKind::softmax,
                       BiasMode bias = BiasMode::channel,
                       ChannelBiasForm form = ChannelBiasForm::product_of_sums);

using LayerMaps = std::vector<std::pair<std::string, Heatmap>>;

/// Upsample every weighted layer map to out_h x out_w, min-max normalise,
/// sum with the given weights (in their order), normalise again.
Heatmap fuse(const LayerMaps& maps, const LayerValues& weights, std::size_t out_h, std::size_t out_w);

}  // namespace icam
