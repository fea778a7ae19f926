#pragma once

// End-to-end commands behind the `icam` executable.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "icam/cam.hpp"
#include "icam/heatmap.hpp"
#include "icam/layer_score.hpp"
#include "icam/model.hpp"
#include "icam/perturb.hpp"
#include "icam/render.hpp"

namespace icam {

struct RunConfig {
  /// Weight file; the fixture model built from fixture_seed when empty.
  std::optional<std::filesystem::path> model_path;
  std::uint64_t fixture_seed = 42;
  CamRequest cam;
  PerturbationConfig perturb;
  double threshold = kDefaultLayerThreshold;
  double iou_threshold_frac = 0.2;
  double blend = 0.5;

  void validate() const;
};

Model load_run_model(const RunConfig& config);

/// "final", "all", or a comma-separated list of scoring points.
std::vector<std::string> resolve_layer_list(const std::string& text, const ModelSpec& spec);

struct Explanation {
  Heatmap heatmap;  // input resolution, min-max normalised
  std::size_t class_index = 0;
  double probability = 0.0;
  LayerValues weights;  // fused layers, declaration order
  std::optional<LayerScoreReport> layer_scores;
};

Explanation explain(const Model& model, const Tensor& image, const RunConfig& config);

/// Sorted-key sidecar: class, probability, config echo, layer weights and
/// (for icam) the layer-score report.
nlohmann::json sidecar_json(const Explanation& explanation, const RunConfig& config);

/// Reads a PPM whose size matches the model input.
Tensor load_input_image(const std::filesystem::path& path, const Model& model, ImageRGB* raw = nullptr);

struct ExplainPaths {
  std::filesystem::path heatmap = "heatmap.pgm";
  std::filesystem::path overlay = "overlay.ppm";
  std::filesystem::path sidecar = "explain.json";
};

void run_explain(const RunConfig& config, const std::filesystem::path& image, const ExplainPaths& out);

/// Writes the report JSON (when `json_out` is set) and prints a ranked table.
LayerScoreReport run_score_layers(const RunConfig& config, const std::filesystem::path& image,
                                  const std::optional<std::filesystem::path>& json_out, std::ostream& table);

struct ManifestRecord {
  std::filesystem::path image;
  std::size_t x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  std::size_t label = 0;
  std::size_t line = 0;  // 1-based line in the manifest
};

/// JSON lines; blank lines are skipped. Relative image paths resolve against
/// the manifest's directory. Errors name the 1-based line number.
std::vector<ManifestRecord> read_manifest(const std::filesystem::path& path);

/// Per-method mean IoU and saliency over correctly classified records.
nlohmann::json run_eval(const RunConfig& config, const std::filesystem::path& manifest,
                        const std::vector<CamMethod>& methods, const std::optional<std::filesystem::path>& json_out);

/// <dir>/<method>.pgm, <dir>/<method>_overlay.ppm and <dir>/strip.ppm for all
/// four methods. Returns the heatmap paths in method order.
std::vector<std::filesystem::path> run_compare(const RunConfig& config, const std::filesystem::path& image,
                                               const std::filesystem::path& out_dir);

/// Writes build_fixture_model(seed) and returns its SHA-256.
std::string run_make_fixture(std::uint64_t seed, const std::filesystem::path& out);

struct SyntheticImage {
  ImageRGB image;
  std::size_t x0 = 0, y0 = 0, x1 = 0, y1 = 0;  // inclusive bounds of the object
};

/// Textured background with one bright rectangular object.
SyntheticImage make_synthetic_image(std::size_t width, std::size_t height, std::uint64_t seed);

}  // namespace icam
