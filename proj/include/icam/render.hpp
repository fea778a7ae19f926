#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "icam/heatmap.hpp"
#include "icam/tensor.hpp"

namespace icam {

/// 8-bit RGB, row-major, interleaved.
struct ImageRGB {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;  // width * height * 3

  ImageRGB() = default;
  ImageRGB(std::size_t w, std::size_t h) : width(w), height(h), pixels(w * h * 3, 0) {}

  std::uint8_t* at(std::size_t row, std::size_t col) { return &pixels[(row * width + col) * 3]; }
  const std::uint8_t* at(std::size_t row, std::size_t col) const { return &pixels[(row * width + col) * 3]; }
  friend bool operator==(const ImageRGB&, const ImageRGB&) = default;
};

struct ImageGray {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;

  ImageGray() = default;
  ImageGray(std::size_t w, std::size_t h) : width(w), height(h), pixels(w * h, 0) {}
  friend bool operator==(const ImageGray&, const ImageGray&) = default;
};

// Binary P6 / P5 with maxval 255. Parse failures throw ParseError with field
// "magic", "header", "maxval" or "pixels".
ImageRGB decode_ppm(std::string_view bytes);
std::string encode_ppm(const ImageRGB& image);
ImageGray decode_pgm(std::string_view bytes);
std::string encode_pgm(const ImageGray& image);

ImageRGB read_ppm(const std::filesystem::path& path);
void write_ppm(const ImageRGB& image, const std::filesystem::path& path);
ImageGray read_pgm(const std::filesystem::path& path);
void write_pgm(const ImageGray& image, const std::filesystem::path& path);

/// [3, H, W] tensor with values pixel / 255.
Tensor image_to_tensor(const ImageRGB& image);
/// Inverse of image_to_tensor; values are clamped to [0, 1] and rounded.
ImageRGB tensor_to_image(const Tensor& t);

/// (h - min) / (max - min). Constant maps become all zeros.
Heatmap normalize_minmax(const Heatmap& h);

/// Half-pixel-centred bilinear interpolation with edge clamping.
Heatmap bilinear_resize(const Heatmap& h, std::size_t out_h, std::size_t out_w);

/// Values in [0, 1] mapped to 0..255, rounded.
ImageGray heatmap_to_gray(const Heatmap& h);

/// Blue, cyan, green, yellow, red at 0, 0.25, 0.5, 0.75, 1; linear between.
/// Inputs outside [0, 1] are clamped.
std::array<double, 3> jet_colormap(double v);
inline constexpr std::array<std::array<double, 3>, 5> kJetAnchors{{
    {0.0, 0.0, 255.0},
    {0.0, 255.0, 255.0},
    {0.0, 255.0, 0.0},
    {255.0, 255.0, 0.0},
    {255.0, 0.0, 0.0},
}};

ImageRGB colorize(const Heatmap& h);

/// (1 - blend) * image + blend * colormap(h), rounded per channel.
ImageRGB overlay(const ImageRGB& image, const Heatmap& h, double blend = 0.5);

/// Images of equal height placed left to right.
ImageRGB hstack(const std::vector<ImageRGB>& images);

}  // namespace icam
