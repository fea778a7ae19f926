#pragma once

// Perturbation-weighted layer importance, redundant-layer filtering and
// layer weights.
//
// For each scoring point l the importance is
//
//   S_l = sum_i w_i * || R - up(P_il) ||_2
//
// where R is the per-pixel channel norm of (I * dO/dI) on the original image,
// P_il the channel norm of relu(A_l * dO/dA_l) for perturbation i, up() the
// bilinear upsampling to input resolution, and w_i the perturbation weight.
// Layers are then ranked, the shortest prefix holding a fraction T of the
// total score is kept, and kept scores are renormalised to sum to 1.

#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "icam/model.hpp"
#include "icam/perturb.hpp"

namespace icam {

/// (layer name, value) in model declaration order.
using LayerValues = std::vector<std::pair<std::string, double>>;

inline constexpr double kDefaultLayerThreshold = 0.95;

struct LayerScoreReport {
  LayerValues scores;
  std::vector<double> perturbation_weights;
  std::vector<std::string> selected;  // ranked, highest score first
  LayerValues weights;                // declaration order, selected layers only
  double threshold = kDefaultLayerThreshold;
  PerturbationConfig config;
  std::size_t class_index = 0;

  double weight(std::string_view layer) const;
  bool is_selected(std::string_view layer) const;
};

/// relu(A_l * G_l).
Tensor phi(const ForwardTrace& trace, std::string_view layer);

/// [C,H,W] -> [H,W], sqrt(sum_c t[c,i,j]^2).
Tensor channel_norm_map(const Tensor& t);

/// Requires traces_perturbed.size() == weights.size() >= 1.
LayerValues layer_importance(const ForwardTrace& original, const std::vector<ForwardTrace>& traces_perturbed,
                             const std::vector<double>& weights);

/// Shortest ranked prefix with cumulative score >= threshold * total. Ties
/// rank by declaration order. Throws ConfigError("no informative layers")
/// when every score is zero.
std::vector<std::string> filter_layers(const LayerValues& scores, double threshold = kDefaultLayerThreshold);

/// S_l / sum_{j in selected} S_j, returned in declaration order.
LayerValues layer_weights(const LayerValues& scores, const std::vector<std::string>& selected);

/// Full scoring pass: probability-kind traces of the image and of each
/// perturbation (class fixed to the original prediction), weights, scores,
/// selection and layer weights.
LayerScoreReport score_layers(const Model& model, const Tensor& image, const PerturbationConfig& config,
                              double threshold = kDefaultLayerThreshold);

nlohmann::json to_json(const LayerScoreReport& report);

}  // namespace icam
