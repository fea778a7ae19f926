#pragma once

// Reverse-mode differentiation over a flat tape.
//
// Every taped operation appends one node holding its output value, the
// indices of its operands and a backward rule. Tape::backward walks the nodes
// in reverse recording order, once each, accumulating cotangents. The tape is
// not thread-safe; use one tape per forward/backward pass.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "icam/tensor.hpp"

namespace icam {

/// Handle to a value recorded on a specific Tape.
struct Var {
  std::uint64_t tape_id = 0;
  std::size_t index = 0;
};

struct BackwardArgs {
  const Tensor& grad_output;
  const Tensor& output;
  std::span<const Tensor* const> inputs;
  /// Accumulate into these; they start zeroed and may alias when an operand
  /// is used more than once.
  std::span<Tensor* const> input_grads;
};

using BackwardRule = std::function<void(const BackwardArgs&)>;

class Tape {
 public:
  Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) noexcept = default;
  Tape& operator=(Tape&&) noexcept = default;

  Var leaf(Tensor value);
  Var record(Tensor value, std::vector<Var> inputs, BackwardRule rule);

  const Tensor& value(Var v) const;
  std::size_t size() const noexcept { return nodes_.size(); }

  /// d(scalar)/d(target) for every target. `scalar` must hold exactly one
  /// value. Targets recorded after `scalar`, or not connected to it, get zeros.
  /// Throws UntapedTargetError for handles that belong to another tape.
  std::vector<Tensor> backward(Var scalar, std::span<const Var> targets) const;

 private:
  struct Node {
    Tensor value;
    std::vector<std::size_t> inputs;
    BackwardRule rule;
  };

  void check(Var v, const char* what) const;

  std::uint64_t id_;
  std::vector<Node> nodes_;
};

namespace ops {

// Eager forms. Used directly for tape-free evaluation and by the taped forms.

Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias, std::size_t stride,
              std::size_t padding);
Tensor relu(const Tensor& t);
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);
Tensor global_avg_pool(const Tensor& t);
Tensor softmax(const Tensor& logits);

std::size_t conv_output_extent(std::size_t in, std::size_t kernel, std::size_t stride,
                               std::size_t padding);

// Taped forms.

Var conv2d(Tape& tape, Var input, Var kernel, Var bias, std::size_t stride, std::size_t padding);
Var relu(Tape& tape, Var t);
Var linear(Tape& tape, Var x, Var weight, Var bias);
Var global_avg_pool(Tape& tape, Var t);
Var softmax(Tape& tape, Var logits);
/// Rank-0 sum of all elements.
Var sum(Tape& tape, Var t);
/// Rank-0 element `index` of a rank-1 tensor.
Var select(Tape& tape, Var v, std::size_t index);

}  // namespace ops
}  // namespace icam
