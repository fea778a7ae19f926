#include "icam/model.hpp"

#include <cmath>
#include <set>

#include "icam/autodiff.hpp"
#include "icam/error.hpp"
#include "icam/prng.hpp"

namespace icam {

void ModelSpec::validate() const {
  if (input_shape.size() != 3 || shape_size(input_shape) == 0) {
    throw ShapeError("model input shape must be [C,H,W] with non-zero extents, got " +
                     shape_to_string(input_shape));
  }
  if (blocks.empty()) throw ConfigError("model needs at least one conv block");
  if (num_classes == 0) throw ConfigError("model needs at least one class");
  std::set<std::string> names;
  std::size_t channels = input_shape[0];
  std::size_t h = input_shape[1];
  std::size_t w = input_shape[2];
  for (const auto& b : blocks) {
    if (b.name.empty() || b.name == "head" || b.name.starts_with("__")) {
      throw ConfigError("invalid block name '" + b.name + "'");
    }
    if (!names.insert(b.name).second) throw ConfigError("duplicate block name '" + b.name + "'");
    if (b.in_channels != channels) {
      throw ShapeError("block '" + b.name + "' expects " + std::to_string(b.in_channels) +
                       " channels, previous layer produces " + std::to_string(channels));
    }
    if (b.out_channels == 0 || b.kernel_size == 0 || b.stride == 0) {
      throw ConfigError("block '" + b.name + "' has a zero extent or stride");
    }
    if (b.kernel_size > h + 2 * b.padding || b.kernel_size > w + 2 * b.padding) {
      throw ShapeError("block '" + b.name + "' kernel does not fit its padded input");
    }
    channels = b.out_channels;
    h = (h + 2 * b.padding - b.kernel_size) / b.stride + 1;
    w = (w + 2 * b.padding - b.kernel_size) / b.stride + 1;
  }
}

std::vector<std::string> ModelSpec::scoring_points() const {
  std::vector<std::string> out;
  out.reserve(blocks.size());
  for (const auto& b : blocks) out.push_back(b.name);
  return out;
}

std::vector<Shape> ModelSpec::block_output_shapes() const {
  std::vector<Shape> out;
  std::size_t h = input_shape.at(1);
  std::size_t w = input_shape.at(2);
  for (const auto& b : blocks) {
    h = (h + 2 * b.padding - b.kernel_size) / b.stride + 1;
    w = (w + 2 * b.padding - b.kernel_size) / b.stride + 1;
    out.push_back({b.out_channels, h, w});
  }
  return out;
}

std::size_t ModelSpec::head_features() const {
  return blocks.empty() ? input_shape.at(0) : blocks.back().out_channels;
}

std::vector<std::pair<std::string, Shape>> parameter_layout(const ModelSpec& spec) {
  std::vector<std::pair<std::string, Shape>> layout;
  for (const auto& b : spec.blocks) {
    layout.emplace_back(b.name + ".weight",
                        Shape{b.out_channels, b.in_channels, b.kernel_size, b.kernel_size});
    layout.emplace_back(b.name + ".bias", Shape{b.out_channels});
  }
  layout.emplace_back("head.weight", Shape{spec.num_classes, spec.head_features()});
  layout.emplace_back("head.bias", Shape{spec.num_classes});
  return layout;
}

Model::Model(ModelSpec spec, std::vector<NamedTensor> parameters)
    : spec_(std::move(spec)), params_(std::move(parameters)) {
  spec_.validate();
  const auto layout = parameter_layout(spec_);
  if (layout.size() != params_.size()) {
    throw ShapeError("model expects " + std::to_string(layout.size()) + " parameter tensors, got " +
                     std::to_string(params_.size()));
  }
  for (std::size_t i = 0; i < layout.size(); ++i) {
    if (params_[i].name != layout[i].first) {
      throw ShapeError("parameter " + std::to_string(i) + " should be '" + layout[i].first +
                       "', got '" + params_[i].name + "'");
    }
    require_shape(params_[i].value, layout[i].second, layout[i].first.c_str());
  }
}

const Tensor& Model::parameter(std::string_view name) const {
  for (const auto& p : params_) {
    if (p.name == name) return p.value;
  }
  throw ConfigError("unknown parameter '" + std::string(name) + "'");
}

std::size_t Model::scoring_point_index(std::string_view name) const {
  for (std::size_t i = 0; i < spec_.blocks.size(); ++i) {
    if (spec_.blocks[i].name == name) return i;
  }
  throw ConfigError("unknown layer '" + std::string(name) + "'");
}

Tensor Model::logits(const Tensor& image) const {
  require_shape(image, spec_.input_shape, "model input");
  Tensor x = ops::relu(ops::conv2d(image, conv_weight(0), conv_bias(0), spec_.blocks[0].stride,
                                   spec_.blocks[0].padding));
  return logits_from(0, x);
}

Tensor Model::logits_from(std::size_t block, const Tensor& activation) const {
  if (block >= spec_.blocks.size()) throw ConfigError("block index out of range");
  require_shape(activation, spec_.block_output_shapes()[block], "scoring-point activation");
  Tensor x = activation;
  for (std::size_t b = block + 1; b < spec_.blocks.size(); ++b) {
    x = ops::relu(
        ops::conv2d(x, conv_weight(b), conv_bias(b), spec_.blocks[b].stride, spec_.blocks[b].padding));
  }
  return ops::linear(ops::global_avg_pool(x), head_weight(), head_bias());
}

ModelSpec fixture_spec() {
  ModelSpec spec;
  spec.input_shape = {3, 32, 32};
  spec.blocks = {
      {"block1", 3, 8, 3, 1, 1},
      {"block2", 8, 16, 3, 2, 1},
      {"block3", 16, 16, 3, 1, 1},
  };
  spec.num_classes = 5;
  return spec;
}

Model build_fixture_model(std::uint64_t seed) {
  ModelSpec spec = fixture_spec();
  Prng rng(seed);
  std::vector<NamedTensor> params;
  for (auto& [name, shape] : parameter_layout(spec)) {
    // fan_in of a conv kernel [out, in, k, k] is in*k*k; of a linear [out, in] it is in.
    const bool is_head = name.starts_with("head.");
    std::size_t fan_in = 0;
    if (is_head) {
      fan_in = spec.head_features();
    } else {
      const auto& block = spec.blocks[std::size_t(params.size() / 2)];
      fan_in = block.in_channels * block.kernel_size * block.kernel_size;
    }
    const double scale = std::sqrt(2.0 / static_cast<double>(fan_in));
    Tensor t(shape);
    for (double& v : t.values()) v = static_cast<double>(static_cast<float>(rng.gaussian() * scale));
    params.push_back({name, std::move(t)});
  }
  return Model(std::move(spec), std::move(params));
}

std::string_view to_string(ScalarKind kind) {
  return kind == ScalarKind::logit ? "logit" : "probability";
}

const LayerRecord& ForwardTrace::layer(std::string_view name) const {
  for (const auto& l : layers) {
    if (l.name == name) return l;
  }
  throw ConfigError("unknown layer '" + std::string(name) + "'");
}

std::size_t argmax(const Tensor& v) {
  if (v.size() == 0) throw ShapeError("argmax of empty tensor");
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

ForwardTrace forward_trace(const Model& model, const Tensor& image,
                           std::optional<std::size_t> class_index, ScalarKind kind) {
  const ModelSpec& spec = model.spec();
  require_shape(image, spec.input_shape, "model input");
  if (class_index && *class_index >= spec.num_classes) {
    throw ConfigError("class index " + std::to_string(*class_index) + " out of range [0, " +
                      std::to_string(spec.num_classes) + ")");
  }

  Tape tape;
  const Var input = tape.leaf(image);
  std::vector<Var> points;
  Var x = input;
  for (std::size_t b = 0; b < spec.blocks.size(); ++b) {
    const Var w = tape.leaf(model.conv_weight(b));
    const Var bias = tape.leaf(model.conv_bias(b));
    x = ops::relu(tape, ops::conv2d(tape, x, w, bias, spec.blocks[b].stride, spec.blocks[b].padding));
    points.push_back(x);
  }
  const Var pooled = ops::global_avg_pool(tape, x);
  const Var logits = ops::linear(tape, pooled, tape.leaf(model.head_weight()), tape.leaf(model.head_bias()));
  const Var probs = ops::softmax(tape, logits);

  ForwardTrace trace;
  trace.input = image;
  trace.logits = tape.value(logits);
  trace.probabilities = tape.value(probs);
  trace.class_index = class_index.value_or(argmax(trace.logits));
  trace.kind = kind;

  const Var scalar = ops::select(tape, kind == ScalarKind::logit ? logits : probs, trace.class_index);
  std::vector<Var> targets{input};
  targets.insert(targets.end(), points.begin(), points.end());
  std::vector<Tensor> grads = tape.backward(scalar, targets);

  trace.input_gradient = std::move(grads[0]);
  for (std::size_t b = 0; b < points.size(); ++b) {
    trace.layers.push_back({spec.blocks[b].name, tape.value(points[b]), std::move(grads[b + 1])});
  }
  return trace;
}

}  // namespace icam
