#include "icam/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <sstream>

#include "icam/checksum.hpp"
#include "icam/error.hpp"
#include "icam/metrics.hpp"
#include "icam/parallel.hpp"
#include "icam/prng.hpp"
#include "icam/weights_io.hpp"

namespace icam {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

void ensure_parent(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
}

Heatmap layer_map(const ForwardTrace& trace, const std::string& layer, const CamRequest& request) {
  switch (request.method) {
    case CamMethod::gradcam: return gradcam_map(trace, layer, request.smooth);
    case CamMethod::gradcampp: return gradcampp_map(trace, layer, request.smooth);
    case CamMethod::layercam: return layercam_map(trace, layer, request.smooth);
    case CamMethod::icam: return icam_layer_map(trace, layer, request.smooth, request.bias, request.channel_form);
  }
  throw ConfigError("unknown method");
}

std::string model_label(const RunConfig& config) {
  return config.model_path ? config.model_path->string() : "fixture:" + std::to_string(config.fixture_seed);
}

// The request a method runs with when it is not the configured one.
RunConfig config_for(const RunConfig& config, CamMethod method) {
  if (config.cam.method == method) return config;
  RunConfig out = config;
  out.cam = CamRequest::for_method(method);
  return out;
}

}  // namespace

void RunConfig::validate() const {
  perturb.validate();
  if (!(threshold > 0.0 && threshold <= 1.0)) throw ConfigError("threshold must be in (0, 1]");
  if (!(iou_threshold_frac > 0.0 && iou_threshold_frac < 1.0)) {
    throw ConfigError("iou-threshold-frac must be in (0, 1)");
  }
  if (!(blend >= 0.0 && blend <= 1.0)) throw ConfigError("blend must be in [0, 1]");
}

Model load_run_model(const RunConfig& config) {
  return config.model_path ? load_model(*config.model_path) : build_fixture_model(config.fixture_seed);
}

std::vector<std::string> resolve_layer_list(const std::string& text, const ModelSpec& spec) {
  const auto points = spec.scoring_points();
  if (text == "final") return {points.back()};
  if (text == "all") return points;
  std::vector<std::string> out;
  std::stringstream in(text);
  std::string name;
  while (std::getline(in, name, ',')) {
    if (std::find(points.begin(), points.end(), name) == points.end()) {
      throw ConfigError("unknown layer '" + name + "'");
    }
    if (std::find(out.begin(), out.end(), name) == out.end()) out.push_back(name);
  }
  if (out.empty()) throw ConfigError("empty layer list");
  return out;
}

Explanation explain(const Model& model, const Tensor& image, const RunConfig& config) {
  config.validate();
  const ForwardTrace trace = forward_trace(model, image, std::nullopt, ScalarKind::logit);
  const auto points = model.spec().scoring_points();

  Explanation out;
  out.class_index = trace.class_index;
  out.probability = trace.probabilities[trace.class_index];

  const auto& request = config.cam;
  if (request.method == CamMethod::icam) {
    LayerScoreReport report = score_layers(model, image, config.perturb, config.threshold);
    out.weights = request.layers.empty() ? report.weights : layer_weights(report.scores, request.layers);
    out.layer_scores = std::move(report);
  } else {
    std::vector<std::string> names = request.layers;
    if (names.empty()) names = request.method == CamMethod::layercam ? points : std::vector{points.back()};
    for (const auto& n : names) out.weights.emplace_back(n, 1.0 / static_cast<double>(names.size()));
  }

  LayerMaps maps;
  for (const auto& [name, w] : out.weights) maps.emplace_back(name, layer_map(trace, name, request));
  out.heatmap = fuse(maps, out.weights, image.dim(1), image.dim(2));
  return out;
}

json sidecar_json(const Explanation& explanation, const RunConfig& config) {
  json layers = json::object();
  for (const auto& [name, w] : explanation.weights) layers[name] = w;
  json j = {
      {"class", explanation.class_index},
      {"probability", explanation.probability},
      {"method", std::string(to_string(config.cam.method))},
      {"smooth", std::string(to_string(config.cam.smooth))},
      {"layers", layers},
      {"heatmap", {{"height", explanation.heatmap.height}, {"width", explanation.heatmap.width}}},
      {"config",
       {{"model", model_label(config)},
        {"n", config.perturb.n},
        {"alpha", config.perturb.alpha},
        {"seed", config.perturb.seed},
        {"threshold", config.threshold},
        {"iou_threshold_frac", config.iou_threshold_frac},
        {"blend", config.blend}}},
  };
  if (config.cam.method == CamMethod::icam) {
    j["bias"] = std::string(to_string(config.cam.bias));
    j["channel_bias_form"] =
        config.cam.channel_form == ChannelBiasForm::product_of_sums ? "product_of_sums" : "sum_of_products";
  }
  if (explanation.layer_scores) j["layer_scores"] = to_json(*explanation.layer_scores);
  return j;
}

Tensor load_input_image(const fs::path& path, const Model& model, ImageRGB* raw) {
  ImageRGB img = read_ppm(path);
  const Shape& in = model.spec().input_shape;
  if (in[0] != 3 || img.height != in[1] || img.width != in[2]) {
    throw ShapeError(path.string() + ": image is " + std::to_string(img.width) + "x" + std::to_string(img.height) +
                     ", model expects " + shape_to_string(in));
  }
  Tensor t = image_to_tensor(img);
  if (raw != nullptr) *raw = std::move(img);
  return t;
}

void run_explain(const RunConfig& config, const fs::path& image, const ExplainPaths& out) {
  const Model model = load_run_model(config);
  ImageRGB raw;
  const Tensor input = load_input_image(image, model, &raw);
  const Explanation e = explain(model, input, config);
  for (const auto* p : {&out.heatmap, &out.overlay, &out.sidecar}) ensure_parent(*p);
  write_pgm(heatmap_to_gray(e.heatmap), out.heatmap);
  write_ppm(overlay(raw, e.heatmap, config.blend), out.overlay);
  write_json(out.sidecar, sidecar_json(e, config));
}

LayerScoreReport run_score_layers(const RunConfig& config, const fs::path& image,
                                  const std::optional<fs::path>& json_out, std::ostream& table) {
  config.validate();
  const Model model = load_run_model(config);
  const Tensor input = load_input_image(image, model);
  LayerScoreReport report = score_layers(model, input, config.perturb, config.threshold);

  if (json_out) {
    ensure_parent(*json_out);
    write_json(*json_out, to_json(report));
  }

  std::vector<std::size_t> order(report.scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return report.scores[a].second > report.scores[b].second; });
  table << "class " << report.class_index << ", threshold " << report.threshold << "\n";
  table << std::left << std::setw(6) << "rank" << std::setw(12) << "layer" << std::setw(16) << "score"
        << std::setw(10) << "selected" << "weight\n";
  std::size_t rank = 1;
  for (std::size_t i : order) {
    const auto& [name, score] = report.scores[i];
    const bool sel = report.is_selected(name);
    table << std::left << std::setw(6) << rank++ << std::setw(12) << name << std::setw(16) << std::setprecision(8)
          << score << std::setw(10) << (sel ? "yes" : "no") << std::setprecision(6) << report.weight(name) << "\n";
  }
  return report;
}

std::vector<ManifestRecord> read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  const fs::path base = path.parent_path();
  std::vector<ManifestRecord> records;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = "manifest line " + std::to_string(line);
    ManifestRecord r;
    r.line = line;
    try {
      const json j = json::parse(text);
      const auto& box = j.at("bbox");
      if (!box.is_array() || box.size() != 4) throw ParseError("bbox", "bbox must be [x0, y0, x1, y1]");
      const fs::path img = j.at("image").get<std::string>();
      r.image = img.is_absolute() ? img : base / img;
      r.x0 = box[0].get<std::size_t>();
      r.y0 = box[1].get<std::size_t>();
      r.x1 = box[2].get<std::size_t>();
      r.y1 = box[3].get<std::size_t>();
      r.label = j.at("label").get<std::size_t>();
    } catch (const ParseError& e) {
      throw ParseError(where, where + ": " + e.what());
    } catch (const json::exception& e) {
      throw ParseError(where, where + ": " + e.what());
    }
    if (r.x0 > r.x1 || r.y0 > r.y1) throw ParseError(where, where + ": bbox corners out of order");
    records.push_back(std::move(r));
  }
  if (records.empty()) throw ConfigError("empty manifest");
  return records;
}

json run_eval(const RunConfig& config, const fs::path& manifest, const std::vector<CamMethod>& methods,
              const std::optional<fs::path>& json_out) {
  config.validate();
  if (methods.empty()) throw ConfigError("eval needs at least one method");
  const Model model = load_run_model(config);
  const auto records = read_manifest(manifest);

  struct Outcome {
    std::size_t predicted = 0;
    bool correct = false;
    std::vector<double> iou, saliency;
  };
  std::vector<Outcome> outcomes(records.size());
  parallel_for(records.size(), [&](std::size_t i) {
    const ManifestRecord& r = records[i];
    const std::string where = "manifest line " + std::to_string(r.line);
    const Tensor input = load_input_image(r.image, model);
    const std::size_t h = input.dim(1), w = input.dim(2);
    if (r.x1 >= w || r.y1 >= h) throw ConfigError(where + ": bbox outside the " + std::to_string(w) + "x" + std::to_string(h) + " image");
    if (r.label >= model.spec().num_classes) throw ConfigError(where + ": label out of range");

    Outcome& o = outcomes[i];
    o.predicted = argmax(model.logits(input));
    o.correct = o.predicted == r.label;
    if (!o.correct) return;
    const BinaryMask box = BinaryMask::box(h, w, r.x0, r.y0, r.x1, r.y1);
    for (CamMethod m : methods) {
      const Heatmap heat = explain(model, input, config_for(config, m)).heatmap;
      o.iou.push_back(iou(threshold_heatmap(heat, config.iou_threshold_frac), box));
      o.saliency.push_back(saliency_score(heat, box));
    }
  });

  std::size_t correct = 0;
  json per_record = json::array();
  std::vector<double> iou_sum(methods.size(), 0.0), sal_sum(methods.size(), 0.0);
  for (std::size_t i = 0; i < records.size(); ++i) {
    const Outcome& o = outcomes[i];
    json rec = {{"image", records[i].image.string()},
                {"label", records[i].label},
                {"predicted", o.predicted},
                {"correct", o.correct}};
    if (o.correct) {
      ++correct;
      json ious = json::object(), sals = json::object();
      for (std::size_t m = 0; m < methods.size(); ++m) {
        const std::string name(to_string(methods[m]));
        ious[name] = o.iou[m];
        sals[name] = o.saliency[m];
        iou_sum[m] += o.iou[m];
        sal_sum[m] += o.saliency[m];
      }
      rec["iou"] = ious;
      rec["saliency"] = sals;
    }
    per_record.push_back(std::move(rec));
  }

  json per_method = json::object();
  for (std::size_t m = 0; m < methods.size(); ++m) {
    json entry = {{"evaluated", correct}};
    entry["mean_iou"] = correct > 0 ? json(iou_sum[m] / static_cast<double>(correct)) : json(nullptr);
    entry["mean_saliency"] = correct > 0 ? json(sal_sum[m] / static_cast<double>(correct)) : json(nullptr);
    per_method[std::string(to_string(methods[m]))] = entry;
  }
  json result = {{"records", records.size()},
                 {"correct", correct},
                 {"accuracy", static_cast<double>(correct) / static_cast<double>(records.size())},
                 {"iou_threshold_frac", config.iou_threshold_frac},
                 {"methods", per_method},
                 {"per_record", per_record}};
  if (json_out) {
    ensure_parent(*json_out);
    write_json(*json_out, result);
  }
  return result;
}

std::vector<fs::path> run_compare(const RunConfig& config, const fs::path& image, const fs::path& out_dir) {
  config.validate();
  const Model model = load_run_model(config);
  ImageRGB raw;
  const Tensor input = load_input_image(image, model, &raw);
  fs::create_directories(out_dir);

  std::vector<fs::path> heatmaps;
  std::vector<ImageRGB> overlays;
  for (CamMethod m : {CamMethod::gradcam, CamMethod::gradcampp, CamMethod::layercam, CamMethod::icam}) {
    const std::string name(to_string(m));
    const Explanation e = explain(model, input, config_for(config, m));
    heatmaps.push_back(out_dir / (name + ".pgm"));
    write_pgm(heatmap_to_gray(e.heatmap), heatmaps.back());
    overlays.push_back(overlay(raw, e.heatmap, config.blend));
    write_ppm(overlays.back(), out_dir / (name + "_overlay.ppm"));
  }
  write_ppm(hstack(overlays), out_dir / "strip.ppm");
  return heatmaps;
}

std::string run_make_fixture(std::uint64_t seed, const fs::path& out) {
  const Model model = build_fixture_model(seed);
  ensure_parent(out);
  save_model(model, out);
  return sha256_hex(serialize_model(model));
}

SyntheticImage make_synthetic_image(std::size_t width, std::size_t height, std::uint64_t seed) {
  if (width < 4 || height < 4) throw ConfigError("synthetic image must be at least 4x4");
  Prng rng(seed);
  SyntheticImage out;
  out.image = ImageRGB(width, height);
  const auto draw = [&](std::size_t lo, std::size_t span) {
    return lo + static_cast<std::size_t>(rng.uniform() * static_cast<double>(span));
  };
  const std::size_t bw = draw(width / 4, width / 4 + 1);
  const std::size_t bh = draw(height / 4, height / 4 + 1);
  out.x0 = draw(0, width - bw + 1);
  out.y0 = draw(0, height - bh + 1);
  out.x1 = out.x0 + bw - 1;
  out.y1 = out.y0 + bh - 1;

  double colour[3];
  for (double& c : colour) c = 150.0 + 100.0 * rng.uniform();
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      const bool inside = x >= out.x0 && x <= out.x1 && y >= out.y0 && y <= out.y1;
      std::uint8_t* px = out.image.at(y, x);
      for (std::size_t c = 0; c < 3; ++c) {
        const double v = inside ? colour[c] + 10.0 * rng.uniform() : 20.0 + 60.0 * rng.uniform();
        px[c] = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
      }
    }
  }
  return out;
}

}  // namespace icam
