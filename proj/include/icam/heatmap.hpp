#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace icam {

enum class HeatmapResolution { layer, input };
enum class HeatmapScale { raw, minmax };

/// Single-channel spatial map, row-major.
struct Heatmap {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> values;
  HeatmapResolution resolution = HeatmapResolution::layer;
  HeatmapScale scale = HeatmapScale::raw;

  Heatmap() = default;
  Heatmap(std::size_t h, std::size_t w, double fill = 0.0,
          HeatmapResolution res = HeatmapResolution::layer, HeatmapScale sc = HeatmapScale::raw)
      : height(h), width(w), values(h * w, fill), resolution(res), scale(sc) {}

  double& at(std::size_t i, std::size_t j) { return values[i * width + j]; }
  double at(std::size_t i, std::size_t j) const { return values[i * width + j]; }
  std::size_t size() const noexcept { return values.size(); }
};

/// Grid of exact 0/1 cells, row-major.
struct BinaryMask {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> cells;

  BinaryMask() = default;
  BinaryMask(std::size_t h, std::size_t w) : height(h), width(w), cells(h * w, 0) {}

  std::uint8_t& at(std::size_t i, std::size_t j) { return cells[i * width + j]; }
  std::uint8_t at(std::size_t i, std::size_t j) const { return cells[i * width + j]; }

  /// Cells with x0 <= x <= x1 and y0 <= y <= y1 set.
  static BinaryMask box(std::size_t h, std::size_t w, std::size_t x0, std::size_t y0, std::size_t x1,
                        std::size_t y1);
};

}  // namespace icam
