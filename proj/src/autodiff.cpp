#include "icam/autodiff.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <optional>
#include <string>

#include "icam/error.hpp"
#include "icam/kernels.hpp"

namespace icam {
namespace {

std::uint64_t next_tape_id() {
  static std::atomic<std::uint64_t> counter{1};
  return counter.fetch_add(1, std::memory_order_relaxed);
}

void accumulate(Tensor& dst, const Tensor& src) {
  kernels::active().axpy(dst.data(), src.data(), 1.0, dst.size());
}

struct ConvGeometry {
  std::size_t c_in, height, width;
  std::size_t c_out, k_h, k_w;
  std::size_t out_h, out_w;
  std::size_t stride, padding;

  std::size_t rows() const { return c_in * k_h * k_w; }
  std::size_t cols() const { return out_h * out_w; }
};

ConvGeometry conv_geometry(const Tensor& input, const Tensor& kernel, const Tensor& bias,
                           std::size_t stride, std::size_t padding) {
  require_rank(input, 3, "conv2d input");
  require_rank(kernel, 4, "conv2d kernel");
  require_rank(bias, 1, "conv2d bias");
  if (stride == 0) throw ShapeError("conv2d: stride must be at least 1");
  ConvGeometry g{};
  g.c_in = input.dim(0);
  g.height = input.dim(1);
  g.width = input.dim(2);
  g.c_out = kernel.dim(0);
  g.k_h = kernel.dim(2);
  g.k_w = kernel.dim(3);
  g.stride = stride;
  g.padding = padding;
  if (kernel.dim(1) != g.c_in) {
    throw ShapeError("conv2d: kernel expects " + std::to_string(kernel.dim(1)) +
                     " input channels, input has " + std::to_string(g.c_in));
  }
  if (bias.dim(0) != g.c_out) {
    throw ShapeError("conv2d: bias has " + std::to_string(bias.dim(0)) + " entries for " +
                     std::to_string(g.c_out) + " output channels");
  }
  if (g.k_h == 0 || g.k_w == 0 || g.k_h > g.height + 2 * padding || g.k_w > g.width + 2 * padding) {
    throw ShapeError("conv2d: kernel " + shape_to_string(kernel.shape()) +
                     " does not fit padded input " + shape_to_string(input.shape()));
  }
  g.out_h = ops::conv_output_extent(g.height, g.k_h, stride, padding);
  g.out_w = ops::conv_output_extent(g.width, g.k_w, stride, padding);
  return g;
}

// Unrolled patches: row r = (ci, kh, kw), column = output position.
std::vector<double> im2col(const Tensor& input, const ConvGeometry& g) {
  std::vector<double> col(g.rows() * g.cols(), 0.0);
  for (std::size_t ci = 0; ci < g.c_in; ++ci) {
    for (std::size_t kh = 0; kh < g.k_h; ++kh) {
      for (std::size_t kw = 0; kw < g.k_w; ++kw) {
        double* row = col.data() + ((ci * g.k_h + kh) * g.k_w + kw) * g.cols();
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + kh) -
                          static_cast<std::ptrdiff_t>(g.padding);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.height)) continue;
          for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            const auto ix = static_cast<std::ptrdiff_t>(ox * g.stride + kw) -
                            static_cast<std::ptrdiff_t>(g.padding);
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.width)) continue;
            row[oy * g.out_w + ox] = input.at(ci, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix));
          }
        }
      }
    }
  }
  return col;
}

void col2im_add(const std::vector<double>& col, const ConvGeometry& g, Tensor& grad_input) {
  for (std::size_t ci = 0; ci < g.c_in; ++ci) {
    for (std::size_t kh = 0; kh < g.k_h; ++kh) {
      for (std::size_t kw = 0; kw < g.k_w; ++kw) {
        const double* row = col.data() + ((ci * g.k_h + kh) * g.k_w + kw) * g.cols();
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + kh) -
                          static_cast<std::ptrdiff_t>(g.padding);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.height)) continue;
          for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            const auto ix = static_cast<std::ptrdiff_t>(ox * g.stride + kw) -
                            static_cast<std::ptrdiff_t>(g.padding);
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.width)) continue;
            grad_input.at(ci, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix)) +=
                row[oy * g.out_w + ox];
          }
        }
      }
    }
  }
}

void check_linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  require_rank(x, 1, "linear input");
  require_rank(weight, 2, "linear weight");
  require_rank(bias, 1, "linear bias");
  if (weight.dim(1) != x.dim(0) || weight.dim(0) != bias.dim(0)) {
    throw ShapeError("linear: weight " + shape_to_string(weight.shape()) + " incompatible with input " +
                     shape_to_string(x.shape()) + " and bias " + shape_to_string(bias.shape()));
  }
}

}  // namespace

Tape::Tape() : id_(next_tape_id()) {}

Var Tape::leaf(Tensor value) { return record(std::move(value), {}, nullptr); }

Var Tape::record(Tensor value, std::vector<Var> inputs, BackwardRule rule) {
  Node node{std::move(value), {}, std::move(rule)};
  node.inputs.reserve(inputs.size());
  for (const Var& v : inputs) {
    check(v, "operand");
    node.inputs.push_back(v.index);
  }
  nodes_.push_back(std::move(node));
  return Var{id_, nodes_.size() - 1};
}

void Tape::check(Var v, const char* what) const {
  if (v.tape_id != id_ || v.index >= nodes_.size()) {
    throw UntapedTargetError(std::string("untaped target: ") + what + " is not recorded on this tape");
  }
}

const Tensor& Tape::value(Var v) const {
  check(v, "value");
  return nodes_[v.index].value;
}

std::vector<Tensor> Tape::backward(Var scalar, std::span<const Var> targets) const {
  check(scalar, "scalar");
  for (const Var& t : targets) check(t, "target");
  const Tensor& out = nodes_[scalar.index].value;
  if (out.size() != 1) {
    throw ShapeError("backward: output must be a scalar, got shape " + shape_to_string(out.shape()));
  }

  std::vector<std::optional<Tensor>> grads(scalar.index + 1);
  grads[scalar.index] = Tensor::filled(out.shape(), 1.0);

  std::vector<const Tensor*> input_values;
  std::vector<Tensor*> input_grads;
  for (std::size_t i = scalar.index + 1; i-- > 0;) {
    if (!grads[i]) continue;
    const Node& node = nodes_[i];
    if (!node.rule) continue;
    input_values.clear();
    input_grads.clear();
    for (std::size_t j : node.inputs) {
      if (!grads[j]) grads[j] = Tensor(nodes_[j].value.shape());
      input_values.push_back(&nodes_[j].value);
      input_grads.push_back(&*grads[j]);
    }
    node.rule(BackwardArgs{*grads[i], node.value, input_values, input_grads});
  }

  std::vector<Tensor> result;
  result.reserve(targets.size());
  for (const Var& t : targets) {
    if (t.index <= scalar.index && grads[t.index]) {
      result.push_back(*grads[t.index]);
    } else {
      result.emplace_back(nodes_[t.index].value.shape());
    }
  }
  return result;
}

namespace ops {

std::size_t conv_output_extent(std::size_t in, std::size_t kernel, std::size_t stride,
                               std::size_t padding) {
  return (in + 2 * padding - kernel) / stride + 1;
}

Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias, std::size_t stride,
              std::size_t padding) {
  const ConvGeometry g = conv_geometry(input, kernel, bias, stride, padding);
  const auto& k = kernels::active();
  const std::vector<double> col = im2col(input, g);
  Tensor out({g.c_out, g.out_h, g.out_w});
  for (std::size_t co = 0; co < g.c_out; ++co) {
    double* dst = out.data() + co * g.cols();
    std::fill(dst, dst + g.cols(), bias[co]);
    const double* weights = kernel.data() + co * g.rows();
    for (std::size_t r = 0; r < g.rows(); ++r) {
      k.axpy(dst, col.data() + r * g.cols(), weights[r], g.cols());
    }
  }
  return out;
}

Tensor relu(const Tensor& t) {
  Tensor out(t.shape());
  kernels::active().relu(out.data(), t.data(), t.size());
  return out;
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  check_linear(x, weight, bias);
  const auto& k = kernels::active();
  const std::size_t rows = weight.dim(0);
  const std::size_t cols = weight.dim(1);
  Tensor out({rows});
  for (std::size_t c = 0; c < rows; ++c) {
    out[c] = k.dot(weight.data() + c * cols, x.data(), cols) + bias[c];
  }
  return out;
}

Tensor global_avg_pool(const Tensor& t) {
  require_rank(t, 3, "global_avg_pool input");
  const std::size_t channels = t.dim(0);
  const std::size_t area = t.dim(1) * t.dim(2);
  if (area == 0) throw ShapeError("global_avg_pool: empty spatial extent");
  const auto& k = kernels::active();
  Tensor out({channels});
  for (std::size_t c = 0; c < channels; ++c) {
    out[c] = k.sum(t.data() + c * area, area) / static_cast<double>(area);
  }
  return out;
}

Tensor softmax(const Tensor& logits) {
  require_rank(logits, 1, "softmax input");
  if (logits.size() == 0) throw ShapeError("softmax: empty input");
  const auto v = logits.values();
  const double peak = *std::max_element(v.begin(), v.end());
  Tensor out(logits.shape());
  double total = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = std::exp(v[i] - peak);
    total += out[i];
  }
  for (double& y : out.values()) y /= total;
  return out;
}

Var conv2d(Tape& tape, Var input, Var kernel, Var bias, std::size_t stride, std::size_t padding) {
  Tensor out = conv2d(tape.value(input), tape.value(kernel), tape.value(bias), stride, padding);
  return tape.record(std::move(out), {input, kernel, bias}, [stride, padding](const BackwardArgs& a) {
    const Tensor& x = *a.inputs[0];
    const Tensor& w = *a.inputs[1];
    const ConvGeometry g = conv_geometry(x, w, *a.inputs[2], stride, padding);
    const auto& k = kernels::active();
    const std::vector<double> col = im2col(x, g);
    std::vector<double> grad_col(col.size(), 0.0);
    Tensor& gw = *a.input_grads[1];
    Tensor& gb = *a.input_grads[2];
    for (std::size_t co = 0; co < g.c_out; ++co) {
      const double* go = a.grad_output.data() + co * g.cols();
      gb[co] += k.sum(go, g.cols());
      double* gw_row = gw.data() + co * g.rows();
      const double* w_row = w.data() + co * g.rows();
      for (std::size_t r = 0; r < g.rows(); ++r) {
        gw_row[r] += k.dot(go, col.data() + r * g.cols(), g.cols());
        k.axpy(grad_col.data() + r * g.cols(), go, w_row[r], g.cols());
      }
    }
    col2im_add(grad_col, g, *a.input_grads[0]);
  });
}

Var relu(Tape& tape, Var t) {
  Tensor out = relu(tape.value(t));
  return tape.record(std::move(out), {t}, [](const BackwardArgs& a) {
    Tensor masked(a.grad_output.shape());
    kernels::active().relu_mask(masked.data(), a.inputs[0]->data(), a.grad_output.data(), masked.size());
    accumulate(*a.input_grads[0], masked);
  });
}

Var linear(Tape& tape, Var x, Var weight, Var bias) {
  Tensor out = linear(tape.value(x), tape.value(weight), tape.value(bias));
  return tape.record(std::move(out), {x, weight, bias}, [](const BackwardArgs& a) {
    const Tensor& xv = *a.inputs[0];
    const Tensor& w = *a.inputs[1];
    const auto& k = kernels::active();
    const std::size_t rows = w.dim(0);
    const std::size_t cols = w.dim(1);
    for (std::size_t c = 0; c < rows; ++c) {
      const double go = a.grad_output[c];
      k.axpy(a.input_grads[0]->data(), w.data() + c * cols, go, cols);
      k.axpy(a.input_grads[1]->data() + c * cols, xv.data(), go, cols);
      (*a.input_grads[2])[c] += go;
    }
  });
}

Var global_avg_pool(Tape& tape, Var t) {
  Tensor out = global_avg_pool(tape.value(t));
  return tape.record(std::move(out), {t}, [](const BackwardArgs& a) {
    const Tensor& x = *a.inputs[0];
    const std::size_t area = x.dim(1) * x.dim(2);
    const double inv = 1.0 / static_cast<double>(area);
    Tensor& gx = *a.input_grads[0];
    for (std::size_t c = 0; c < x.dim(0); ++c) {
      const double share = a.grad_output[c] * inv;
      double* dst = gx.data() + c * area;
      for (std::size_t i = 0; i < area; ++i) dst[i] += share;
    }
  });
}

Var softmax(Tape& tape, Var logits) {
  Tensor out = softmax(tape.value(logits));
  return tape.record(std::move(out), {logits}, [](const BackwardArgs& a) {
    const Tensor& y = a.output;
    const double inner = kernels::active().dot(a.grad_output.data(), y.data(), y.size());
    Tensor& gv = *a.input_grads[0];
    for (std::size_t i = 0; i < y.size(); ++i) gv[i] += y[i] * (a.grad_output[i] - inner);
  });
}

Var sum(Tape& tape, Var t) {
  const Tensor& v = tape.value(t);
  Tensor out = Tensor::scalar(kernels::active().sum(v.data(), v.size()));
  return tape.record(std::move(out), {t}, [](const BackwardArgs& a) {
    const double g = a.grad_output.item();
    for (double& x : a.input_grads[0]->values()) x += g;
  });
}

Var select(Tape& tape, Var v, std::size_t index) {
  const Tensor& t = tape.value(v);
  require_rank(t, 1, "select input");
  if (index >= t.size()) {
    throw ShapeError("select: index " + std::to_string(index) + " out of range for " +
                     shape_to_string(t.shape()));
  }
  Tensor out = Tensor::scalar(t[index]);
  return tape.record(std::move(out), {v}, [index](const BackwardArgs& a) {
    (*a.input_grads[0])[index] += a.grad_output.item();
  });
}

}  // namespace ops
}  // namespace icam
