#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "icam/checksum.hpp"
#include "icam/error.hpp"
#include "icam/metrics.hpp"
#include "icam/pipeline.hpp"
#include "icam/verify.hpp"
#include "support.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json read_json(const fs::path& p) {
  std::ifstream in(p);
  return json::parse(in);
}

fs::path write_image(const test::TempDir& dir, const std::string& name, std::uint64_t seed,
                     icam::SyntheticImage* info = nullptr) {
  const auto s = icam::make_synthetic_image(32, 32, seed);
  icam::write_ppm(s.image, dir / name);
  if (info != nullptr) *info = s;
  return dir / name;
}

std::size_t predicted(const fs::path& image) {
  const icam::Model m = icam::build_fixture_model(42);
  return icam::argmax(m.logits(icam::image_to_tensor(icam::read_ppm(image))));
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(ICAM_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

}  // namespace

TEST_SUITE("pipeline") {
  TEST_CASE("explain writes three outputs and normalised layer weights") {
    test::TempDir dir("explain");
    const fs::path img = write_image(dir, "img.ppm", 1);
    icam::RunConfig cfg;
    icam::run_explain(cfg, img, {dir / "h.pgm", dir / "o.ppm", dir / "s.json"});
    CHECK(fs::exists(dir / "h.pgm"));
    CHECK(fs::exists(dir / "o.ppm"));
    const json side = read_json(dir / "s.json");
    double total = 0.0;
    for (const auto& [k, v] : side.at("layers").items()) total += v.get<double>();
    CHECK(std::abs(total - 1.0) < 1e-12);
    CHECK(side.contains("layer_scores"));
    CHECK(side.at("method") == "icam");
    CHECK(side.at("bias") == "channel");
    CHECK(side.at("config").at("n") == 8);

    icam::run_explain(cfg, img, {dir / "h2.pgm", dir / "o2.ppm", dir / "s2.json"});
    CHECK(icam::sha256_file(dir / "h.pgm") == icam::sha256_file(dir / "h2.pgm"));
    CHECK(icam::sha256_file(dir / "o.ppm") == icam::sha256_file(dir / "o2.ppm"));
    CHECK(icam::sha256_file(dir / "s.json") == icam::sha256_file(dir / "s2.json"));
  }

  TEST_CASE("grad-cam on the final layer has no layer-score section") {
    test::TempDir dir("explain_gradcam");
    const fs::path img = write_image(dir, "img.ppm", 2);
    icam::RunConfig cfg;
    cfg.cam = icam::CamRequest::for_method(icam::CamMethod::gradcam);
    cfg.cam.layers = icam::resolve_layer_list("final", icam::fixture_spec());
    icam::run_explain(cfg, img, {dir / "h.pgm", dir / "o.ppm", dir / "s.json"});
    const json side = read_json(dir / "s.json");
    CHECK_FALSE(side.contains("layer_scores"));
    CHECK(side.at("layers").size() == 1);
    CHECK(side.at("layers").at("block3") == 1.0);
  }

  TEST_CASE("layer lists") {
    const auto spec = icam::fixture_spec();
    CHECK(icam::resolve_layer_list("final", spec) == std::vector<std::string>{"block3"});
    CHECK(icam::resolve_layer_list("all", spec).size() == 3);
    CHECK(icam::resolve_layer_list("block2,block1", spec) == std::vector<std::string>{"block2", "block1"});
    CHECK_THROWS_AS(icam::resolve_layer_list("block4", spec), icam::ConfigError);
  }

  TEST_CASE("score-layers: threshold one selects every layer and the table is ranked") {
    test::TempDir dir("score");
    const fs::path img = write_image(dir, "img.ppm", 3);
    icam::RunConfig cfg;
    cfg.threshold = 1.0;
    std::ostringstream table;
    const auto report = icam::run_score_layers(cfg, img, dir / "r.json", table);
    CHECK(report.selected.size() == 3);
    CHECK(table.str().find("rank") != std::string::npos);
    CHECK(read_json(dir / "r.json").at("selected").size() == 3);
  }

  TEST_CASE("score-layers with n = 1 equals the library call") {
    test::TempDir dir("score_n1");
    const fs::path img = write_image(dir, "img.ppm", 4);
    icam::RunConfig cfg;
    cfg.perturb.n = 1;
    std::ostringstream table;
    const auto report = icam::run_score_layers(cfg, img, std::nullopt, table);
    const auto direct = icam::score_layers(icam::build_fixture_model(42), icam::image_to_tensor(icam::read_ppm(img)),
                                           cfg.perturb, cfg.threshold);
    CHECK(report.scores == direct.scores);
  }

  TEST_CASE("manifest errors") {
    test::TempDir dir("manifest");
    { std::ofstream(dir / "empty.jsonl") << "\n\n"; }
    CHECK_THROWS_WITH_AS(icam::read_manifest(dir / "empty.jsonl"), "empty manifest", icam::ConfigError);
    {
      std::ofstream out(dir / "bad.jsonl");
      out << R"({"image": "a.ppm", "bbox": [0,0,3,3], "label": 0})" << "\n";
      out << R"({"image": "a.ppm", "bbox": [0,0,3], "label": 0})" << "\n";
    }
    try {
      (void)icam::read_manifest(dir / "bad.jsonl");
      FAIL("expected ParseError");
    } catch (const icam::ParseError& e) {
      CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
  }

  TEST_CASE("eval means are the per-record averages over correct predictions") {
    test::TempDir dir("eval");
    std::ofstream out(dir / "m.jsonl");
    for (std::uint64_t s = 0; s < 4; ++s) {
      icam::SyntheticImage info;
      const fs::path img = write_image(dir, "img" + std::to_string(s) + ".ppm", 10 + s, &info);
      // Last record gets a wrong label.
      const std::size_t label = s == 3 ? (predicted(img) + 1) % 5 : predicted(img);
      out << json{{"image", img.filename().string()}, {"bbox", {info.x0, info.y0, info.x1, info.y1}}, {"label", label}}.dump()
          << "\n";
    }
    out.close();
    icam::RunConfig cfg;
    const json r = icam::run_eval(cfg, dir / "m.jsonl", {icam::CamMethod::gradcam, icam::CamMethod::icam}, dir / "e.json");
    CHECK(r.at("records") == 4);
    CHECK(r.at("correct") == 3);
    CHECK(r.at("accuracy") == 0.75);
    for (const char* m : {"gradcam", "icam"}) {
      double iou = 0.0, sal = 0.0;
      for (const auto& rec : r.at("per_record")) {
        if (!rec.at("correct").get<bool>()) continue;
        iou += rec.at("iou").at(m).get<double>();
        sal += rec.at("saliency").at(m).get<double>();
      }
      CHECK(r.at("methods").at(m).at("mean_iou").get<double>() == doctest::Approx(iou / 3).epsilon(1e-15));
      CHECK(r.at("methods").at(m).at("mean_saliency").get<double>() == doctest::Approx(sal / 3).epsilon(1e-15));
    }
    CHECK(read_json(dir / "e.json") == r);
  }

  TEST_CASE("full-image boxes give saliency one") {
    test::TempDir dir("eval_full");
    const fs::path img = write_image(dir, "img.ppm", 20);
    { std::ofstream(dir / "m.jsonl") << json{{"image", "img.ppm"}, {"bbox", {0, 0, 31, 31}}, {"label", predicted(img)}}.dump() << "\n"; }
    icam::RunConfig cfg;
    const json r = icam::run_eval(cfg, dir / "m.jsonl", {icam::CamMethod::icam}, std::nullopt);
    CHECK(r.at("methods").at("icam").at("mean_saliency").get<double>() == 1.0);
    const icam::BinaryMask all = icam::BinaryMask::box(32, 32, 0, 0, 31, 31);
    CHECK(icam::iou(all, all) == 1.0);
  }

  TEST_CASE("bbox outside the image names the line") {
    test::TempDir dir("eval_bbox");
    write_image(dir, "img.ppm", 21);
    { std::ofstream(dir / "m.jsonl") << R"({"image": "img.ppm", "bbox": [0,0,32,4], "label": 0})" << "\n"; }
    CHECK_THROWS_WITH_AS(icam::run_eval({}, dir / "m.jsonl", {icam::CamMethod::icam}, std::nullopt),
                         doctest::Contains("manifest line 1"), icam::ConfigError);
  }

  TEST_CASE("compare writes four distinct heatmaps and a 4x wide strip") {
    test::TempDir dir("compare");
    const fs::path img = write_image(dir, "img.ppm", 5);
    const auto maps = icam::run_compare({}, img, dir / "out");
    REQUIRE(maps.size() == 4);
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = i + 1; j < 4; ++j) CHECK(icam::sha256_file(maps[i]) != icam::sha256_file(maps[j]));
    CHECK(icam::read_ppm(dir / "out" / "strip.ppm").width == 4 * 32);
  }

  TEST_CASE("make-fixture is reproducible and seed dependent") {
    test::TempDir dir("fixture");
    const std::string a = icam::run_make_fixture(7, dir / "a.bin");
    const std::string b = icam::run_make_fixture(7, dir / "b.bin");
    const std::string c = icam::run_make_fixture(8, dir / "c.bin");
    CHECK(a == b);
    CHECK(a != c);
    CHECK(a == icam::sha256_file(dir / "a.bin"));
  }

  TEST_CASE("explicit model file gives the same result as the built-in fixture") {
    test::TempDir dir("model_file");
    const fs::path img = write_image(dir, "img.ppm", 6);
    icam::run_make_fixture(42, dir / "m.bin");
    icam::RunConfig a, b;
    b.model_path = dir / "m.bin";
    const icam::Model ma = icam::load_run_model(a), mb = icam::load_run_model(b);
    const auto t = icam::image_to_tensor(icam::read_ppm(img));
    CHECK(icam::explain(ma, t, a).heatmap.values == icam::explain(mb, t, b).heatmap.values);
  }

  TEST_CASE("verify report lists all suites and fails under the injected fault") {
    const auto ok = icam::run_verification();
    CHECK(ok.passed());
    CHECK(ok.suites.size() == 3);
    icam::VerifyOptions bad;
    bad.flip_second_derivative = true;
    const auto report = icam::run_verification(bad);
    CHECK_FALSE(report.passed());
    CHECK(report.suites.size() == 3);
    CHECK(report.to_text().find("FAIL  softmax n=2") != std::string::npos);
  }

  TEST_CASE("cli exit codes") {
    CHECK(run_cli("verify") == 0);
    CHECK(run_cli("verify --inject-f2-sign-flip") != 0);
    CHECK(run_cli("explain --image /nonexistent.ppm") != 0);
    CHECK(run_cli("explain --image x.ppm --method bogus") != 0);
  }
}
