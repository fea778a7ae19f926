#include "icam/cam.hpp"

#include <cmath>
#include <string>

#include "icam/error.hpp"
#include "icam/kernels.hpp"
#include "icam/render.hpp"

namespace icam {
namespace {

const LayerRecord& logit_layer(const ForwardTrace& trace, std::string_view layer) {
  if (trace.kind != ScalarKind::logit) {
    throw ConfigError("class activation maps need a logit-kind trace (gradients of S^c)");
  }
  return trace.layer(layer);
}

SmoothValues smooth_for(const ForwardTrace& trace, SmoothKind smooth) {
  return evaluate_smooth(smooth, trace.logits, trace.class_index);
}

std::size_t area_of(const Tensor& t) { return t.dim(1) * t.dim(2); }

// relu(sum_k weight_k * A_k)
Heatmap weighted_channel_map(const Tensor& activation, const std::vector<double>& channel_weights) {
  const std::size_t area = area_of(activation);
  Heatmap h(activation.dim(1), activation.dim(2));
  const auto& k = kernels::active();
  for (std::size_t c = 0; c < activation.dim(0); ++c) {
    k.axpy(h.values.data(), activation.data() + c * area, channel_weights[c], area);
  }
  k.relu(h.values.data(), h.values.data(), h.size());
  return h;
}

// relu(sum_k W_k (elementwise) A_k + extra)
Heatmap elementwise_map(const Tensor& weights, const Tensor& activation, const std::vector<double>* extra) {
  const std::size_t area = area_of(activation);
  Heatmap h(activation.dim(1), activation.dim(2));
  const auto& k = kernels::active();
  std::vector<double> product(area);
  for (std::size_t c = 0; c < activation.dim(0); ++c) {
    k.multiply(product.data(), weights.data() + c * area, activation.data() + c * area, area);
    k.axpy(h.values.data(), product.data(), 1.0, area);
  }
  if (extra != nullptr) k.axpy(h.values.data(), extra->data(), 1.0, area);
  k.relu(h.values.data(), h.values.data(), h.size());
  return h;
}

}  // namespace

std::string_view to_string(CamMethod method) {
  switch (method) {
    case CamMethod::gradcam: return "gradcam";
    case CamMethod::gradcampp: return "gradcampp";
    case CamMethod::layercam: return "layercam";
    case CamMethod::icam: return "icam";
  }
  return "unknown";
}

std::string_view to_string(BiasMode mode) {
  switch (mode) {
    case BiasMode::none: return "none";
    case BiasMode::channel: return "channel";
    case BiasMode::spatial: return "spatial";
  }
  return "unknown";
}

CamMethod parse_method(std::string_view name) {
  if (name == "gradcam") return CamMethod::gradcam;
  if (name == "gradcampp") return CamMethod::gradcampp;
  if (name == "layercam") return CamMethod::layercam;
  if (name == "icam") return CamMethod::icam;
  throw ConfigError("unknown method '" + std::string(name) + "'");
}

BiasMode parse_bias(std::string_view name) {
  if (name == "none") return BiasMode::none;
  if (name == "channel") return BiasMode::channel;
  if (name == "spatial") return BiasMode::spatial;
  throw ConfigError("unknown bias mode '" + std::string(name) + "'");
}

SmoothKind default_smooth(CamMethod method) {
  switch (method) {
    case CamMethod::gradcam:
    case CamMethod::layercam: return SmoothKind::identity;
    case CamMethod::gradcampp: return SmoothKind::exp;
    case CamMethod::icam: return SmoothKind::softmax;
  }
  return SmoothKind::identity;
}

CamRequest CamRequest::for_method(CamMethod method) {
  CamRequest r;
  r.method = method;
  r.smooth = default_smooth(method);
  r.bias = method == CamMethod::icam ? BiasMode::channel : BiasMode::none;
  return r;
}

std::vector<double> gradcam_channel_weights(const ForwardTrace& trace, std::string_view layer, SmoothKind smooth) {
  const LayerRecord& rec = logit_layer(trace, layer);
  const double f1 = smooth_for(trace, smooth).d1;
  const std::size_t area = area_of(rec.gradient);
  const auto& k = kernels::active();
  std::vector<double> w(rec.gradient.dim(0));
  for (std::size_t c = 0; c < w.size(); ++c) {
    w[c] = f1 * k.sum(rec.gradient.data() + c * area, area) / static_cast<double>(area);
  }
  return w;
}

Heatmap gradcam_map(const ForwardTrace& trace, std::string_view layer, SmoothKind smooth) {
  return weighted_channel_map(logit_layer(trace, layer).activation, gradcam_channel_weights(trace, layer, smooth));
}

Tensor generalized_alpha(double f2, double f3, const Tensor& gradient, const Tensor& activation) {
  if (gradient.shape() != activation.shape()) throw ShapeError("generalized_alpha: gradient and activation shapes differ");
  require_rank(gradient, 3, "generalized_alpha");
  const std::size_t area = area_of(gradient);
  Tensor alpha(gradient.shape());
  for (std::size_t c = 0; c < gradient.dim(0); ++c) {
    const double* g = gradient.data() + c * area;
    const double* a = activation.data() + c * area;
    double cubic = 0.0;
    for (std::size_t i = 0; i < area; ++i) cubic += a[i] * g[i] * g[i] * g[i];
    const double third = f3 * cubic;
    double* out = alpha.data() + c * area;
    for (std::size_t i = 0; i < area; ++i) {
      const double second = f2 * g[i] * g[i];
      const double den = 2.0 * second + third;
      const double guard = kAlphaStabilizer * (std::abs(2.0 * second) + std::abs(third));
      out[i] = std::abs(den) <= guard ? 0.0 : second / den;
    }
  }
  return alpha;
}

std::vector<double> gradcampp_channel_weights(const ForwardTrace& trace, std::string_view layer,
                                              SmoothKind smooth) {
  const LayerRecord& rec = logit_layer(trace, layer);
  const SmoothValues f = smooth_for(trace, smooth);
  const Tensor alpha = generalized_alpha(f.d2, f.d3, rec.gradient, rec.activation);
  const std::size_t area = area_of(rec.gradient);
  std::vector<double> w(rec.gradient.dim(0), 0.0);
  for (std::size_t c = 0; c < w.size(); ++c) {
    for (std::size_t i = 0; i < area; ++i) {
      const double gy = f.d1 * rec.gradient[c * area + i];
      if (gy > 0.0) w[c] += alpha[c * area + i] * gy;
    }
  }
  return w;
}

Heatmap gradcampp_map(const ForwardTrace& trace, std::string_view layer, SmoothKind smooth) {
  return weighted_channel_map(logit_layer(trace, layer).activation, gradcampp_channel_weights(trace, layer, smooth));
}

Heatmap layercam_map(const ForwardTrace& trace, std::string_view layer, SmoothKind smooth) {
  const LayerRecord& rec = logit_layer(trace, layer);
  const double f1 = smooth_for(trace, smooth).d1;
  Tensor w(rec.gradient.shape());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::max(f1 * rec.gradient[i], 0.0);
  return elementwise_map(w, rec.activation, nullptr);
}

Tensor icam_weights(const Tensor& alpha, double f1, const Tensor& gradient) {
  if (alpha.shape() != gradient.shape()) throw ShapeError("icam_weights: alpha and gradient shapes differ");
  Tensor w(alpha.shape());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::tanh(alpha[i]) * std::max(f1 * gradient[i], 0.0);
  return w;
}

std::vector<double> channel_bias(double score, const Tensor& weights, const Tensor& activation, ChannelBiasForm form) {
  if (weights.shape() != activation.shape()) throw ShapeError("channel_bias: weight and activation shapes differ");
  require_rank(weights, 3, "channel_bias");
  const std::size_t area = area_of(weights);
  const auto& k = kernels::active();
  std::vector<double> bias(weights.dim(0));
  for (std::size_t c = 0; c < bias.size(); ++c) {
    const double* w = weights.data() + c * area;
    const double* a = activation.data() + c * area;
    const double explained =
        form == ChannelBiasForm::product_of_sums ? k.sum(w, area) * k.sum(a, area) : k.dot(w, a, area);
    bias[c] = score - explained;
  }
  return bias;
}

Tensor spatial_bias(double score, const Tensor& weights, const Tensor& activation) {
  if (weights.shape() != activation.shape()) throw ShapeError("spatial_bias: weight and activation shapes differ");
  require_rank(weights, 3, "spatial_bias");
  const std::size_t area = area_of(weights);
  const auto& k = kernels::active();
  Tensor bias(weights.shape());
  for (std::size_t c = 0; c < weights.dim(0); ++c) {
    const double total = k.sum(activation.data() + c * area, area);
    for (std::size_t i = 0; i < area; ++i) bias[c * area + i] = score - weights[c * area + i] * total;
  }
  return bias;
}

Heatmap icam_layer_map(const ForwardTrace& trace, std::string_view layer, SmoothKind smooth, BiasMode bias,
                       ChannelBiasForm form) {
  const LayerRecord& rec = logit_layer(trace, layer);
  const SmoothValues f = smooth_for(trace, smooth);
  const Tensor alpha = generalized_alpha(f.d2, f.d3, rec.gradient, rec.activation);
  const Tensor w = icam_weights(alpha, f.d1, rec.gradient);
  const double score = trace.logits[trace.class_index];
  const std::size_t area = area_of(w);

  std::vector<double> extra;
  if (bias == BiasMode::channel) {
    double total = 0.0;
    for (double b : channel_bias(score, w, rec.activation, form)) total += b;
    extra.assign(area, total);
  } else if (bias == BiasMode::spatial) {
    const Tensor b = spatial_bias(score, w, rec.activation);
    extra.assign(area, 0.0);
    for (std::size_t c = 0; c < b.dim(0); ++c) kernels::active().axpy(extra.data(), b.data() + c * area, 1.0, area);
  }
  return elementwise_map(w, rec.activation, bias == BiasMode::none ? nullptr : &extra);
}

Heatmap fuse(const LayerMaps& maps, const LayerValues& weights, std::size_t out_h, std::size_t out_w) {
  if (weights.empty()) throw ConfigError("fuse: no layer weights");
  Heatmap acc(out_h, out_w, 0.0, HeatmapResolution::input, HeatmapScale::raw);
  for (const auto& [name, weight] : weights) {
    const Heatmap* map = nullptr;
    for (const auto& [map_name, m] : maps) {
      if (map_name == name) map = &m;
    }
    if (map == nullptr) throw ConfigError("fuse: missing map for layer '" + name + "'");
    const Heatmap up = normalize_minmax(bilinear_resize(*map, out_h, out_w));
    kernels::active().axpy(acc.values.data(), up.values.data(), weight, acc.size());
  }
  Heatmap out = normalize_minmax(acc);
  out.resolution = HeatmapResolution::input;
  return out;
}

}  // namespace icam
