#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "icam/tensor.hpp"

namespace icam {

/// conv2d followed by ReLU. The post-ReLU output is a scoring point named
/// after the block.
struct ConvBlockSpec {
  std::string name;
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t kernel_size = 3;
  std::size_t stride = 1;
  std::size_t padding = 1;

  friend bool operator==(const ConvBlockSpec&, const ConvBlockSpec&) = default;
};

/// Conv blocks, then global average pooling, then one linear head.
struct ModelSpec {
  Shape input_shape;  // [C, H, W]
  std::vector<ConvBlockSpec> blocks;
  std::size_t num_classes = 0;

  /// Throws ShapeError / ConfigError when the layers do not chain.
  void validate() const;
  std::vector<std::string> scoring_points() const;
  std::vector<Shape> block_output_shapes() const;
  std::size_t head_features() const;

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

struct NamedTensor {
  std::string name;
  Tensor value;
};

/// Parameter names and shapes in declaration order:
/// <block>.weight, <block>.bias for each block, then head.weight, head.bias.
std::vector<std::pair<std::string, Shape>> parameter_layout(const ModelSpec& spec);

/// Immutable network: architecture plus parameters.
class Model {
 public:
  /// `parameters` must match parameter_layout(spec) in order and shape.
  Model(ModelSpec spec, std::vector<NamedTensor> parameters);

  const ModelSpec& spec() const noexcept { return spec_; }
  const std::vector<NamedTensor>& parameters() const noexcept { return params_; }
  const Tensor& parameter(std::string_view name) const;

  const Tensor& conv_weight(std::size_t block) const { return params_[2 * block].value; }
  const Tensor& conv_bias(std::size_t block) const { return params_[2 * block + 1].value; }
  const Tensor& head_weight() const { return params_[params_.size() - 2].value; }
  const Tensor& head_bias() const { return params_[params_.size() - 1].value; }

  std::size_t scoring_point_index(std::string_view name) const;

  /// Untaped forward pass.
  Tensor logits(const Tensor& image) const;
  /// Logits computed from the post-ReLU output of block `block`, running only
  /// the layers after it.
  Tensor logits_from(std::size_t block, const Tensor& activation) const;

 private:
  ModelSpec spec_;
  std::vector<NamedTensor> params_;
};

/// 3x32x32 input; conv3x3 blocks 3->8 (s1), 8->16 (s2), 16->16 (s1), all
/// padding 1; GAP; linear 16->5.
ModelSpec fixture_spec();

/// fixture_spec() with every parameter (weights and biases, declaration
/// order, row-major) drawn as N(0,1) * sqrt(2 / fan_in) from Prng(seed) and
/// rounded to float32.
Model build_fixture_model(std::uint64_t seed);

enum class ScalarKind { logit, probability };

std::string_view to_string(ScalarKind kind);

struct LayerRecord {
  std::string name;
  Tensor activation;
  /// d(selected scalar)/d(activation).
  Tensor gradient;
};

struct ForwardTrace {
  Tensor input;
  std::vector<LayerRecord> layers;
  Tensor logits;
  Tensor probabilities;
  Tensor input_gradient;
  std::size_t class_index = 0;
  ScalarKind kind = ScalarKind::probability;

  const LayerRecord& layer(std::string_view name) const;
};

/// Lowest index wins ties.
std::size_t argmax(const Tensor& v);

/// Forward pass, then one backward pass from S^c (logit) or Y^c
/// (probability). `class_index` defaults to argmax of the logits.
ForwardTrace forward_trace(const Model& model, const Tensor& image,
                           std::optional<std::size_t> class_index = std::nullopt,
                           ScalarKind kind = ScalarKind::probability);

}  // namespace icam
