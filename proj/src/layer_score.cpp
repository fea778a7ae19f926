#include "icam/layer_score.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "icam/error.hpp"
#include "icam/kernels.hpp"
#include "icam/metrics.hpp"
#include "icam/parallel.hpp"
#include "icam/render.hpp"

namespace icam {
namespace {

Heatmap as_heatmap(const Tensor& map) {
  Heatmap h(map.dim(0), map.dim(1));
  std::copy(map.values().begin(), map.values().end(), h.values.begin());
  return h;
}

const double* find_value(const LayerValues& values, std::string_view layer) {
  for (const auto& [name, v] : values) {
    if (name == layer) return &v;
  }
  return nullptr;
}

}  // namespace

double LayerScoreReport::weight(std::string_view layer) const {
  const double* w = find_value(weights, layer);
  return w != nullptr ? *w : 0.0;
}

bool LayerScoreReport::is_selected(std::string_view layer) const {
  return std::find(selected.begin(), selected.end(), layer) != selected.end();
}

Tensor phi(const ForwardTrace& trace, std::string_view layer) {
  const LayerRecord& rec = trace.layer(layer);
  const auto& k = kernels::active();
  Tensor product(rec.activation.shape());
  k.multiply(product.data(), rec.activation.data(), rec.gradient.data(), product.size());
  Tensor out(product.shape());
  k.relu(out.data(), product.data(), out.size());
  return out;
}

Tensor channel_norm_map(const Tensor& t) {
  require_rank(t, 3, "channel_norm_map input");
  if (t.dim(0) == 0) throw ShapeError("channel_norm_map: no channels");
  const std::size_t area = t.dim(1) * t.dim(2);
  Tensor out({t.dim(1), t.dim(2)});
  const auto& k = kernels::active();
  for (std::size_t c = 0; c < t.dim(0); ++c) k.add_squares(out.data(), t.data() + c * area, area);
  for (double& v : out.values()) v = std::sqrt(v);
  return out;
}

LayerValues layer_importance(const ForwardTrace& original, const std::vector<ForwardTrace>& traces_perturbed,
                             const std::vector<double>& weights) {
  if (traces_perturbed.empty()) throw ConfigError("layer_importance needs at least one perturbation");
  if (traces_perturbed.size() != weights.size()) {
    throw ConfigError("layer_importance: " + std::to_string(traces_perturbed.size()) + " traces but " +
                      std::to_string(weights.size()) + " weights");
  }
  for (const auto& t : traces_perturbed) {
    if (t.class_index != original.class_index || t.layers.size() != original.layers.size()) {
      throw ConfigError("layer_importance: perturbed traces must share the model and class of the original");
    }
  }

  const auto& k = kernels::active();
  Tensor weighted_input(original.input.shape());
  k.multiply(weighted_input.data(), original.input.data(), original.input_gradient.data(), weighted_input.size());
  const Tensor reference = channel_norm_map(weighted_input);
  const std::size_t out_h = reference.dim(0);
  const std::size_t out_w = reference.dim(1);

  LayerValues scores;
  for (const auto& layer : original.layers) {
    double score = 0.0;
    for (std::size_t i = 0; i < traces_perturbed.size(); ++i) {
      const Heatmap up =
          bilinear_resize(as_heatmap(channel_norm_map(phi(traces_perturbed[i], layer.name))), out_h, out_w);
      const double distance = std::sqrt(k.squared_distance(reference.data(), up.values.data(), up.size()));
      score += weights[i] * distance;
    }
    scores.emplace_back(layer.name, score);
  }
  return scores;
}

std::vector<std::string> filter_layers(const LayerValues& scores, double threshold) {
  if (!(threshold > 0.0 && threshold <= 1.0)) throw ConfigError("layer threshold must be in (0, 1]");
  if (scores.empty()) throw ConfigError("no informative layers");
  for (const auto& [name, s] : scores) {
    if (!(s >= 0.0) || !std::isfinite(s)) throw ConfigError("layer score for '" + name + "' is not a finite non-negative value");
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a].second > scores[b].second; });

  double total = 0.0;
  for (std::size_t i : order) total += scores[i].second;
  if (!(total > 0.0)) throw ConfigError("no informative layers");

  // Relative slack keeps the cut stable against last-bit rounding.
  const double target = threshold * total - 1e-12 * total;
  std::vector<std::string> selected;
  double cumulative = 0.0;
  for (std::size_t i : order) {
    cumulative += scores[i].second;
    selected.push_back(scores[i].first);
    if (cumulative >= target) break;
  }
  return selected;
}

LayerValues layer_weights(const LayerValues& scores, const std::vector<std::string>& selected) {
  if (selected.empty()) throw ConfigError("layer_weights: empty selection");
  double total = 0.0;
  for (const auto& name : selected) {
    const double* s = find_value(scores, name);
    if (s == nullptr) throw ConfigError("layer_weights: unknown layer '" + name + "'");
    total += *s;
  }
  if (!(total > 0.0)) throw ConfigError("layer_weights: selected layers have zero total score");
  LayerValues out;
  for (const auto& [name, s] : scores) {
    if (std::find(selected.begin(), selected.end(), name) != selected.end()) out.emplace_back(name, s / total);
  }
  return out;
}

LayerScoreReport score_layers(const Model& model, const Tensor& image, const PerturbationConfig& config,
                              double threshold) {
  config.validate();
  const ForwardTrace original = forward_trace(model, image, std::nullopt, ScalarKind::probability);
  const PerturbationSet set = generate_set(image, config);
  const ProbDist output(original.probabilities);

  std::vector<ForwardTrace> traces(set.images.size());
  std::vector<double> weights(set.images.size(), 0.0);
  parallel_for(set.images.size(), [&](std::size_t i) {
    traces[i] = forward_trace(model, set.images[i], original.class_index, ScalarKind::probability);
    weights[i] = perturbation_weight(image, set.images[i], output, ProbDist(traces[i].probabilities));
  });

  LayerScoreReport report;
  report.scores = layer_importance(original, traces, weights);
  report.perturbation_weights = std::move(weights);
  report.selected = filter_layers(report.scores, threshold);
  report.weights = layer_weights(report.scores, report.selected);
  report.threshold = threshold;
  report.config = config;
  report.class_index = original.class_index;
  return report;
}

nlohmann::json to_json(const LayerScoreReport& report) {
  nlohmann::json scores = nlohmann::json::object();
  for (const auto& [name, s] : report.scores) scores[name] = s;
  nlohmann::json weights = nlohmann::json::object();
  for (const auto& [name, w] : report.weights) weights[name] = w;
  return {{"scores", scores},
          {"selected", report.selected},
          {"weights", weights},
          {"threshold", report.threshold},
          {"n", report.config.n},
          {"alpha", report.config.alpha},
          {"seed", report.config.seed},
          {"class", report.class_index},
          {"perturbation_weights", report.perturbation_weights}};
}

}  // namespace icam
