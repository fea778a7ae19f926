// icam: explanations, layer scores, evaluation and self-checks for the
// toy CNN.

#include <cstdlib>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "icam/error.hpp"
#include "icam/pipeline.hpp"
#include "icam/render.hpp"
#include "icam/verify.hpp"

namespace {

struct Options {
  icam::RunConfig run;
  std::string model;
  std::string method = "icam";
  std::string smooth;
  std::string bias = "channel";
  std::string layer;
  bool sum_of_products = false;
};

void add_run_options(CLI::App& cmd, Options& o) {
  cmd.add_option("--model", o.model, "ICAMW001 weight file (default: fixture model)");
  cmd.add_option("--fixture-seed", o.run.fixture_seed, "Seed of the fixture model used without --model")
      ->capture_default_str();
  cmd.add_option("--method", o.method, "gradcam | gradcampp | layercam | icam")->capture_default_str();
  cmd.add_option("--smooth", o.smooth, "identity | exp | softmax (default depends on --method)");
  cmd.add_option("--bias", o.bias, "none | channel | spatial (icam only)")->capture_default_str();
  cmd.add_flag("--bias-sum-of-products", o.sum_of_products, "Channel bias as S - sum(w*A) instead of S - sum(w)sum(A)");
  cmd.add_option("--layer", o.layer, "final | all | comma-separated layer names");
  cmd.add_option("--n-perturb", o.run.perturb.n, "Perturbations per image")->capture_default_str();
  cmd.add_option("--alpha", o.run.perturb.alpha, "Perturbation strength")->capture_default_str();
  cmd.add_option("--seed", o.run.perturb.seed, "Perturbation seed")->capture_default_str();
  cmd.add_option("--threshold", o.run.threshold, "Cumulative layer-score threshold")->capture_default_str();
  cmd.add_option("--iou-threshold-frac", o.run.iou_threshold_frac, "Heatmap threshold as a fraction of its max")
      ->capture_default_str();
  cmd.add_option("--blend", o.run.blend, "Overlay blend factor")->capture_default_str();
}

icam::RunConfig finish(Options& o) {
  icam::RunConfig cfg = o.run;
  if (!o.model.empty()) cfg.model_path = o.model;
  const auto method = icam::parse_method(o.method);
  cfg.cam = icam::CamRequest::for_method(method);
  if (!o.smooth.empty()) cfg.cam.smooth = icam::parse_smooth(o.smooth);
  if (method == icam::CamMethod::icam) cfg.cam.bias = icam::parse_bias(o.bias);
  if (o.sum_of_products) cfg.cam.channel_form = icam::ChannelBiasForm::sum_of_products;
  if (!o.layer.empty()) cfg.cam.layers = icam::resolve_layer_list(o.layer, icam::load_run_model(cfg).spec());
  cfg.validate();
  return cfg;
}

std::vector<icam::CamMethod> parse_methods(const std::string& text) {
  std::vector<icam::CamMethod> out;
  std::stringstream in(text);
  std::string name;
  while (std::getline(in, name, ',')) out.push_back(icam::parse_method(name));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Integrative class activation maps for a small CNN"};
  app.require_subcommand(1);
  Options o;

  std::string image;
  icam::ExplainPaths paths;
  std::string heatmap_out = paths.heatmap.string(), overlay_out = paths.overlay.string(),
              sidecar_out = paths.sidecar.string();
  auto* explain = app.add_subcommand("explain", "Heatmap, overlay and JSON sidecar for one image");
  add_run_options(*explain, o);
  explain->add_option("--image", image, "Input PPM")->required();
  explain->add_option("--heatmap", heatmap_out, "Output PGM")->capture_default_str();
  explain->add_option("--overlay", overlay_out, "Output PPM")->capture_default_str();
  explain->add_option("--sidecar", sidecar_out, "Output JSON")->capture_default_str();

  std::string json_out;
  auto* score = app.add_subcommand("score-layers", "Rank scoring points by perturbation-weighted importance");
  add_run_options(*score, o);
  score->add_option("--image", image, "Input PPM")->required();
  score->add_option("--out", json_out, "Report JSON");

  std::string manifest, methods = "gradcam,gradcampp,layercam,icam";
  auto* eval = app.add_subcommand("eval", "Localisation metrics over a JSON-lines manifest");
  add_run_options(*eval, o);
  eval->add_option("--manifest", manifest, "JSON lines: {\"image\", \"bbox\": [x0,y0,x1,y1], \"label\"}")->required();
  eval->add_option("--methods", methods, "Comma-separated methods")->capture_default_str();
  eval->add_option("--out", json_out, "Metrics JSON");

  std::string out_dir = "compare";
  auto* compare = app.add_subcommand("compare", "Run all four methods on one image");
  add_run_options(*compare, o);
  compare->add_option("--image", image, "Input PPM")->required();
  compare->add_option("--out-dir", out_dir, "Output directory")->capture_default_str();

  icam::VerifyOptions verify_opts;
  auto* verify = app.add_subcommand("verify", "Check analytic derivatives and divergences against oracles");
  verify->add_option("--fixture-seed", verify_opts.fixture_seed)->capture_default_str();
  verify->add_flag("--inject-f2-sign-flip", verify_opts.flip_second_derivative,
                   "Negative control: flip the sign of f''");

  std::uint64_t seed = 42;
  std::string out_path;
  auto* fixture = app.add_subcommand("make-fixture", "Write the fixture model");
  fixture->add_option("--seed", seed)->capture_default_str();
  fixture->add_option("--out", out_path, "Weight file")->required();

  std::size_t width = 32, height = 32;
  auto* make_image = app.add_subcommand("make-image", "Write a synthetic PPM with one object; prints its bbox");
  make_image->add_option("--seed", seed)->capture_default_str();
  make_image->add_option("--width", width)->capture_default_str();
  make_image->add_option("--height", height)->capture_default_str();
  make_image->add_option("--out", out_path, "Output PPM")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (explain->parsed()) {
      icam::run_explain(finish(o), image, {heatmap_out, overlay_out, sidecar_out});
    } else if (score->parsed()) {
      std::optional<std::filesystem::path> out;
      if (!json_out.empty()) out = json_out;
      icam::run_score_layers(finish(o), image, out, std::cout);
    } else if (eval->parsed()) {
      std::optional<std::filesystem::path> out;
      if (!json_out.empty()) out = json_out;
      const auto result = icam::run_eval(finish(o), manifest, parse_methods(methods), out);
      if (!out) std::cout << result.dump(2) << "\n";
    } else if (compare->parsed()) {
      for (const auto& p : icam::run_compare(finish(o), image, out_dir)) std::cout << p.string() << "\n";
    } else if (verify->parsed()) {
      const auto report = icam::run_verification(verify_opts);
      std::cout << report.to_text();
      return report.passed() ? EXIT_SUCCESS : EXIT_FAILURE;
    } else if (fixture->parsed()) {
      std::cout << icam::run_make_fixture(seed, out_path) << "  " << out_path << "\n";
    } else if (make_image->parsed()) {
      const auto synth = icam::make_synthetic_image(width, height, seed);
      icam::write_ppm(synth.image, out_path);
      std::cout << nlohmann::json{{"bbox", {synth.x0, synth.y0, synth.x1, synth.y1}}, {"image", out_path}}.dump()
                << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return EXIT_SUCCESS;
}
