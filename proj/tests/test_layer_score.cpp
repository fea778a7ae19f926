#include <doctest.h>

#include <cmath>

#include "icam/error.hpp"
#include "icam/layer_score.hpp"
#include "icam/metrics.hpp"
#include "support.hpp"

using icam::LayerValues;
using icam::Tensor;

namespace {

double weight_of(const LayerValues& w, const std::string& name) {
  for (const auto& [n, v] : w) {
    if (n == name) return v;
  }
  return -1.0;
}

// Per-pixel channel norm by direct loops.
icam::Heatmap norm_map(const Tensor& t) {
  icam::Heatmap h(t.dim(1), t.dim(2));
  for (std::size_t i = 0; i < t.dim(1); ++i)
    for (std::size_t j = 0; j < t.dim(2); ++j) {
      double s = 0.0;
      for (std::size_t c = 0; c < t.dim(0); ++c) s += t.at(c, i, j) * t.at(c, i, j);
      h.at(i, j) = std::sqrt(s);
    }
  return h;
}

}  // namespace

TEST_SUITE("layer_score") {
  TEST_CASE("worked filtering example") {
    const LayerValues scores{{"a", 0.5}, {"b", 0.3}, {"c", 0.15}, {"d", 0.05}};
    const auto sel = icam::filter_layers(scores, 0.95);
    CHECK(sel == std::vector<std::string>{"a", "b", "c"});
    const auto w = icam::layer_weights(scores, sel);
    REQUIRE(w.size() == 3);
    CHECK(std::abs(weight_of(w, "a") - 10.0 / 19.0) < 1e-12);
    CHECK(std::abs(weight_of(w, "b") - 6.0 / 19.0) < 1e-12);
    CHECK(std::abs(weight_of(w, "c") - 3.0 / 19.0) < 1e-12);
  }

  TEST_CASE("selection order is by score, ties by declaration order") {
    const LayerValues scores{{"x", 0.2}, {"y", 0.4}, {"z", 0.4}};
    CHECK(icam::filter_layers(scores, 0.5) == std::vector<std::string>{"y", "z"});
    CHECK(icam::filter_layers(scores, 0.3) == std::vector<std::string>{"y"});
  }

  TEST_CASE("threshold one keeps every layer with a non-zero score") {
    const LayerValues scores{{"a", 0.1}, {"b", 0.7}, {"c", 0.2}};
    CHECK(icam::filter_layers(scores, 1.0).size() == 3);
    const LayerValues with_zero{{"a", 0.1}, {"b", 0.0}, {"c", 0.2}};
    CHECK(icam::filter_layers(with_zero, 1.0) == std::vector<std::string>{"c", "a"});
  }

  TEST_CASE("degenerate scores and thresholds") {
    const LayerValues zeros{{"a", 0.0}, {"b", 0.0}};
    CHECK_THROWS_WITH_AS(icam::filter_layers(zeros, 0.95), "no informative layers", icam::ConfigError);
    CHECK_THROWS_AS(icam::filter_layers({{"a", 1.0}}, 0.0), icam::ConfigError);
    CHECK_THROWS_AS(icam::filter_layers({{"a", 1.0}}, 1.01), icam::ConfigError);
    CHECK_THROWS_AS(icam::filter_layers({{"a", -1.0}}, 0.5), icam::ConfigError);
  }

  TEST_CASE("random score vectors: weights sum to one and rescaling changes nothing") {
    icam::Prng rng(31);
    for (int trial = 0; trial < 100; ++trial) {
      const std::size_t n = 1 + static_cast<std::size_t>(rng.uniform() * 8);
      LayerValues s;
      for (std::size_t i = 0; i < n; ++i) s.emplace_back("l" + std::to_string(i), 0.01 + rng.uniform());
      const double t = 0.05 + 0.95 * rng.uniform();
      const auto sel = icam::filter_layers(s, t);
      const auto w = icam::layer_weights(s, sel);
      double total = 0.0;
      for (const auto& [name, v] : w) total += v;
      CHECK(std::abs(total - 1.0) < 1e-12);

      LayerValues scaled = s;
      const double k = std::pow(10.0, 6.0 * rng.uniform() - 3.0);
      for (auto& [name, v] : scaled) v *= k;
      CHECK(icam::filter_layers(scaled, t) == sel);
    }
  }

  TEST_CASE("channel norm on a hand example") {
    const Tensor t({2, 1, 2}, {3.0, 1.0, 4.0, 0.0});
    const Tensor m = icam::channel_norm_map(t);
    CHECK(m.shape() == icam::Shape{1, 2});
    CHECK(m[0] == 5.0);
    CHECK(m[1] == 1.0);
  }

  TEST_CASE("layer importance matches a direct evaluation") {
    const icam::Model model = icam::build_fixture_model(42);
    const Tensor img = test::random_tensor({3, 32, 32}, 12, 0.0, 1.0);
    const auto orig = icam::forward_trace(model, img);
    const auto set = icam::generate_set(img, {3, 0.4, 5});
    std::vector<icam::ForwardTrace> traces;
    const std::vector<double> w{0.7, 0.2, 0.45};
    for (const auto& p : set.images) traces.push_back(icam::forward_trace(model, p, orig.class_index));
    const LayerValues got = icam::layer_importance(orig, traces, w);

    Tensor weighted(img.shape());
    for (std::size_t i = 0; i < img.size(); ++i) weighted[i] = img[i] * orig.input_gradient[i];
    const icam::Heatmap ref = norm_map(weighted);
    REQUIRE(got.size() == 3);
    for (std::size_t l = 0; l < 3; ++l) {
      double want = 0.0;
      for (std::size_t i = 0; i < 3; ++i) {
        const auto& rec = traces[i].layers[l];
        Tensor phi(rec.activation.shape());
        for (std::size_t k = 0; k < phi.size(); ++k) phi[k] = std::max(rec.activation[k] * rec.gradient[k], 0.0);
        const icam::Heatmap up = test::naive_bilinear(norm_map(phi), 32, 32);
        double d = 0.0;
        for (std::size_t k = 0; k < up.size(); ++k) d += (ref.values[k] - up.values[k]) * (ref.values[k] - up.values[k]);
        want += w[i] * std::sqrt(d);
      }
      CHECK(got[l].first == orig.layers[l].name);
      CHECK(test::rel_err(got[l].second, want) < 1e-12);
    }
  }

  TEST_CASE("score_layers with one perturbation equals the library pieces on the same seed") {
    const icam::Model model = icam::build_fixture_model(42);
    const Tensor img = test::random_tensor({3, 32, 32}, 13, 0.0, 1.0);
    const icam::PerturbationConfig cfg{1, 0.4, 77};
    const auto report = icam::score_layers(model, img, cfg, 0.95);

    const auto orig = icam::forward_trace(model, img);
    const auto set = icam::generate_set(img, cfg);
    const auto pert = icam::forward_trace(model, set.images[0], orig.class_index);
    const double w = icam::perturbation_weight(img, set.images[0], icam::ProbDist(orig.probabilities),
                                               icam::ProbDist(pert.probabilities));
    const LayerValues scores = icam::layer_importance(orig, {pert}, {w});
    CHECK(report.scores == scores);
    CHECK(report.perturbation_weights == std::vector<double>{w});
    CHECK(report.class_index == orig.class_index);
    double total = 0.0;
    for (const auto& [n, v] : report.weights) total += v;
    CHECK(std::abs(total - 1.0) < 1e-12);
  }

  TEST_CASE("an all-zero image can still be scored") {
    const icam::Model model = icam::build_fixture_model(42);
    const auto report = icam::score_layers(model, Tensor({3, 32, 32}), {8, 0.4, 42}, 0.95);
    CHECK_FALSE(report.selected.empty());
  }

  TEST_CASE("importance input validation") {
    const icam::Model model = icam::build_fixture_model(42);
    const auto t = icam::forward_trace(model, Tensor({3, 32, 32}));
    CHECK_THROWS_AS(icam::layer_importance(t, {}, {}), icam::ConfigError);
    CHECK_THROWS_AS(icam::layer_importance(t, {t}, {1.0, 2.0}), icam::ConfigError);
  }
}
