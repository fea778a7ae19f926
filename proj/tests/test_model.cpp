#include <doctest.h>

#include <cmath>

#include "icam/autodiff.hpp"
#include "icam/error.hpp"
#include "icam/model.hpp"
#include "icam/prng.hpp"
#include "support.hpp"

using icam::ScalarKind;
using icam::Tensor;

TEST_SUITE("model") {
  TEST_CASE("fixture architecture") {
    const auto spec = icam::fixture_spec();
    CHECK(spec.scoring_points() == std::vector<std::string>{"block1", "block2", "block3"});
    const auto shapes = spec.block_output_shapes();
    CHECK(shapes[0] == icam::Shape{8, 32, 32});
    CHECK(shapes[1] == icam::Shape{16, 16, 16});
    CHECK(shapes[2] == icam::Shape{16, 16, 16});
    CHECK(spec.head_features() == 16);
    CHECK(spec.num_classes == 5);
  }

  TEST_CASE("fixture parameters come from one scaled gaussian stream, rounded to float32") {
    const icam::Model m = icam::build_fixture_model(9);
    icam::Prng rng(9);
    const double fan_ins[] = {27, 27, 72, 72, 144, 144, 16, 16};
    std::size_t p = 0;
    for (const auto& named : m.parameters()) {
      const double scale = std::sqrt(2.0 / fan_ins[p++]);
      for (double v : named.value.values()) {
        REQUIRE(v == static_cast<double>(static_cast<float>(rng.gaussian() * scale)));
      }
    }
    CHECK(p == 8);
  }

  TEST_CASE("spec validation") {
    auto spec = icam::fixture_spec();
    spec.blocks[1].in_channels = 7;
    CHECK_THROWS_AS(spec.validate(), icam::ShapeError);
    spec = icam::fixture_spec();
    spec.blocks[2].name = "block1";
    CHECK_THROWS_AS(spec.validate(), icam::ConfigError);
    spec = icam::fixture_spec();
    spec.num_classes = 0;
    CHECK_THROWS_AS(spec.validate(), icam::ConfigError);
    spec = icam::fixture_spec();
    spec.blocks[0].kernel_size = 40;
    CHECK_THROWS_AS(spec.validate(), icam::ShapeError);
  }

  TEST_CASE("model rejects parameters that do not match the layout") {
    const icam::Model good = icam::build_fixture_model(1);
    auto params = good.parameters();
    params[0].value = Tensor({8, 3, 3, 2});
    CHECK_THROWS_AS(icam::Model(icam::fixture_spec(), params), icam::ShapeError);
    params = good.parameters();
    params.pop_back();
    CHECK_THROWS_AS(icam::Model(icam::fixture_spec(), params), icam::ShapeError);
  }

  TEST_CASE("trace agrees with the untaped forward pass") {
    const icam::Model m = icam::build_fixture_model(42);
    const Tensor img = test::random_tensor({3, 32, 32}, 3, 0.0, 1.0);
    const auto trace = icam::forward_trace(m, img);
    const Tensor logits = m.logits(img);
    CHECK(trace.logits == logits);
    CHECK(trace.class_index == icam::argmax(logits));
    CHECK(trace.kind == ScalarKind::probability);
    double total = 0.0;
    for (double p : trace.probabilities.values()) total += p;
    CHECK(total == doctest::Approx(1.0).epsilon(1e-14));
    REQUIRE(trace.layers.size() == 3);
    for (std::size_t b = 0; b < 3; ++b) {
      const Tensor again = m.logits_from(b, trace.layers[b].activation);
      for (std::size_t i = 0; i < 5; ++i) CHECK(again[i] == doctest::Approx(logits[i]).epsilon(1e-13));
    }
  }

  TEST_CASE("logit gradient at the final block is the head weight over H*W") {
    const icam::Model m = icam::build_fixture_model(42);
    const Tensor img = test::random_tensor({3, 32, 32}, 4, 0.0, 1.0);
    const auto trace = icam::forward_trace(m, img, 2, ScalarKind::logit);
    const auto& g = trace.layer("block3").gradient;
    for (std::size_t k = 0; k < 16; ++k) {
      for (std::size_t i = 0; i < 256; ++i) CHECK(std::abs(g[k * 256 + i] - m.head_weight().at(2, k) / 256.0) < 1e-15);
    }
  }

  TEST_CASE("input gradient of the class probability matches finite differences") {
    const icam::Model m = icam::build_fixture_model(42);
    Tensor img = test::random_tensor({3, 32, 32}, 5, 0.0, 1.0);
    const auto trace = icam::forward_trace(m, img);
    const std::size_t c = trace.class_index;
    icam::Prng rng(8);
    for (int s = 0; s < 10; ++s) {
      const auto i = static_cast<std::size_t>(rng.uniform() * static_cast<double>(img.size()));
      const double keep = img[i];
      const double h = 1e-6;
      img[i] = keep + h;
      const double up = icam::ops::softmax(m.logits(img))[c];
      img[i] = keep - h;
      const double down = icam::ops::softmax(m.logits(img))[c];
      img[i] = keep;
      const double numeric = (up - down) / (2 * h);
      CHECK(std::abs(trace.input_gradient[i] - numeric) <= 1e-6 * std::abs(numeric) + 1e-10);
    }
  }

  TEST_CASE("class index out of range and wrong input shape") {
    const icam::Model m = icam::build_fixture_model(42);
    CHECK_THROWS_AS(icam::forward_trace(m, Tensor({3, 32, 32}), 5), icam::ConfigError);
    CHECK_THROWS_AS(icam::forward_trace(m, Tensor({3, 16, 16})), icam::ShapeError);
    CHECK_THROWS_AS(icam::forward_trace(m, Tensor({3, 32, 32})).layer("block9"), icam::ConfigError);
  }

  TEST_CASE("argmax breaks ties toward the lowest index") {
    CHECK(icam::argmax(Tensor({4}, {1.0, 3.0, 3.0, 2.0})) == 1);
    CHECK(icam::argmax(Tensor({3}, {0.0, 0.0, 0.0})) == 0);
  }
}
