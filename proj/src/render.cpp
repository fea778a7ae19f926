#include "icam/render.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include "icam/error.hpp"

namespace icam {
namespace {

struct PnmHeader {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t data_offset = 0;
};

// Skips whitespace and '#' comments; returns false at end of input.
bool skip_space(std::string_view bytes, std::size_t& pos) {
  while (pos < bytes.size()) {
    const auto c = static_cast<unsigned char>(bytes[pos]);
    if (c == '#') {
      while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
    } else if (std::isspace(c)) {
      ++pos;
    } else {
      return true;
    }
  }
  return false;
}

std::size_t read_number(std::string_view bytes, std::size_t& pos, const char* what) {
  if (!skip_space(bytes, pos) || !std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
    throw ParseError("header", std::string("malformed header: expected ") + what);
  }
  std::size_t value = 0;
  while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
    value = value * 10 + static_cast<std::size_t>(bytes[pos] - '0');
    if (value > (std::size_t{1} << 32)) throw ParseError("header", std::string("malformed header: ") + what + " too large");
    ++pos;
  }
  return value;
}

PnmHeader parse_header(std::string_view bytes, std::string_view magic, std::size_t channels) {
  if (bytes.size() < 2 || bytes.substr(0, 2) != magic) {
    throw ParseError("magic", "wrong magic: expected '" + std::string(magic) + "'");
  }
  std::size_t pos = 2;
  if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos]))) {
    throw ParseError("header", "malformed header: missing whitespace after magic");
  }
  PnmHeader h;
  h.width = read_number(bytes, pos, "width");
  h.height = read_number(bytes, pos, "height");
  const std::size_t maxval = read_number(bytes, pos, "maxval");
  if (maxval != 255) throw ParseError("maxval", "maxval must be 255, got " + std::to_string(maxval));
  if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos]))) {
    throw ParseError("header", "malformed header: missing whitespace after maxval");
  }
  h.data_offset = pos + 1;
  if (h.width == 0 || h.height == 0) throw ParseError("header", "malformed header: zero image extent");
  const std::size_t need = h.width * h.height * channels;
  if (bytes.size() - h.data_offset < need) {
    throw ParseError("pixels", "truncated pixel data: need " + std::to_string(need) + " bytes, have " +
                                   std::to_string(bytes.size() - h.data_offset));
  }
  return h;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::string& bytes, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

template <typename Fn>
auto with_path(const std::filesystem::path& path, Fn&& fn) {
  try {
    return fn();
  } catch (const ParseError& e) {
    throw ParseError(e.field(), path.string() + ": " + e.what());
  }
}

std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 255.0)));
}

}  // namespace

ImageRGB decode_ppm(std::string_view bytes) {
  const PnmHeader h = parse_header(bytes, "P6", 3);
  ImageRGB img(h.width, h.height);
  std::copy_n(bytes.data() + h.data_offset, img.pixels.size(), reinterpret_cast<char*>(img.pixels.data()));
  return img;
}

std::string encode_ppm(const ImageRGB& image) {
  std::string out = "P6\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
  out.append(reinterpret_cast<const char*>(image.pixels.data()), image.pixels.size());
  return out;
}

ImageGray decode_pgm(std::string_view bytes) {
  const PnmHeader h = parse_header(bytes, "P5", 1);
  ImageGray img(h.width, h.height);
  std::copy_n(bytes.data() + h.data_offset, img.pixels.size(), reinterpret_cast<char*>(img.pixels.data()));
  return img;
}

std::string encode_pgm(const ImageGray& image) {
  std::string out = "P5\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
  out.append(reinterpret_cast<const char*>(image.pixels.data()), image.pixels.size());
  return out;
}

ImageRGB read_ppm(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  return with_path(path, [&] { return decode_ppm(bytes); });
}

void write_ppm(const ImageRGB& image, const std::filesystem::path& path) { write_file(encode_ppm(image), path); }

ImageGray read_pgm(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  return with_path(path, [&] { return decode_pgm(bytes); });
}

void write_pgm(const ImageGray& image, const std::filesystem::path& path) { write_file(encode_pgm(image), path); }

Tensor image_to_tensor(const ImageRGB& image) {
  Tensor t({3, image.height, image.width});
  for (std::size_t y = 0; y < image.height; ++y) {
    for (std::size_t x = 0; x < image.width; ++x) {
      const std::uint8_t* px = image.at(y, x);
      for (std::size_t c = 0; c < 3; ++c) t.at(c, y, x) = static_cast<double>(px[c]) / 255.0;
    }
  }
  return t;
}

ImageRGB tensor_to_image(const Tensor& t) {
  require_rank(t, 3, "tensor_to_image");
  if (t.dim(0) != 3) throw ShapeError("tensor_to_image: expected 3 channels");
  ImageRGB img(t.dim(2), t.dim(1));
  for (std::size_t y = 0; y < img.height; ++y) {
    for (std::size_t x = 0; x < img.width; ++x) {
      for (std::size_t c = 0; c < 3; ++c) img.at(y, x)[c] = to_byte(t.at(c, y, x) * 255.0);
    }
  }
  return img;
}

Heatmap normalize_minmax(const Heatmap& h) {
  Heatmap out = h;
  out.scale = HeatmapScale::minmax;
  if (h.values.empty()) return out;
  const auto [lo_it, hi_it] = std::minmax_element(h.values.begin(), h.values.end());
  const double lo = *lo_it;
  const double range = *hi_it - lo;
  if (!(range > 0.0)) {
    std::fill(out.values.begin(), out.values.end(), 0.0);
    return out;
  }
  for (double& v : out.values) v = (v - lo) / range;
  return out;
}

Heatmap bilinear_resize(const Heatmap& h, std::size_t out_h, std::size_t out_w) {
  if (out_h == 0 || out_w == 0) throw ConfigError("bilinear_resize: output extents must be at least 1");
  if (h.height == 0 || h.width == 0) throw ShapeError("bilinear_resize: empty input");
  Heatmap out(out_h, out_w, 0.0, h.resolution, HeatmapScale::raw);
  if (out_h == h.height && out_w == h.width) {
    out.values = h.values;
    out.scale = h.scale;
    return out;
  }
  const auto [lo_it, hi_it] = std::minmax_element(h.values.begin(), h.values.end());
  const double lo = *lo_it;
  const double hi = *hi_it;

  struct Tap {
    std::size_t i0, i1;
    double w;
  };
  auto taps = [](std::size_t n_out, std::size_t n_in) {
    std::vector<Tap> t(n_out);
    const double scale = static_cast<double>(n_in) / static_cast<double>(n_out);
    for (std::size_t o = 0; o < n_out; ++o) {
      double src = (static_cast<double>(o) + 0.5) * scale - 0.5;
      src = std::clamp(src, 0.0, static_cast<double>(n_in - 1));
      const auto i0 = static_cast<std::size_t>(std::floor(src));
      t[o] = {i0, std::min(i0 + 1, n_in - 1), src - static_cast<double>(i0)};
    }
    return t;
  };
  const auto rows = taps(out_h, h.height);
  const auto cols = taps(out_w, h.width);
  for (std::size_t y = 0; y < out_h; ++y) {
    const Tap& ty = rows[y];
    for (std::size_t x = 0; x < out_w; ++x) {
      const Tap& tx = cols[x];
      const double top = h.at(ty.i0, tx.i0) + tx.w * (h.at(ty.i0, tx.i1) - h.at(ty.i0, tx.i0));
      const double bottom = h.at(ty.i1, tx.i0) + tx.w * (h.at(ty.i1, tx.i1) - h.at(ty.i1, tx.i0));
      out.at(y, x) = std::clamp(top + ty.w * (bottom - top), lo, hi);
    }
  }
  return out;
}

ImageGray heatmap_to_gray(const Heatmap& h) {
  ImageGray img(h.width, h.height);
  for (std::size_t i = 0; i < h.values.size(); ++i) img.pixels[i] = to_byte(h.values[i] * 255.0);
  return img;
}

std::array<double, 3> jet_colormap(double v) {
  v = std::clamp(v, 0.0, 1.0);
  const double pos = v * 4.0;
  const auto seg = std::min<std::size_t>(static_cast<std::size_t>(pos), 3);
  const double t = pos - static_cast<double>(seg);
  std::array<double, 3> rgb{};
  for (std::size_t c = 0; c < 3; ++c) {
    rgb[c] = kJetAnchors[seg][c] + t * (kJetAnchors[seg + 1][c] - kJetAnchors[seg][c]);
  }
  return rgb;
}

ImageRGB colorize(const Heatmap& h) {
  ImageRGB img(h.width, h.height);
  for (std::size_t i = 0; i < h.values.size(); ++i) {
    const auto rgb = jet_colormap(h.values[i]);
    for (std::size_t c = 0; c < 3; ++c) img.pixels[i * 3 + c] = to_byte(rgb[c]);
  }
  return img;
}

ImageRGB overlay(const ImageRGB& image, const Heatmap& h, double blend) {
  if (image.width != h.width || image.height != h.height) {
    throw ShapeError("overlay: image is " + std::to_string(image.width) + "x" + std::to_string(image.height) +
                     ", heatmap is " + std::to_string(h.width) + "x" + std::to_string(h.height));
  }
  if (!(blend >= 0.0 && blend <= 1.0)) throw ConfigError("overlay blend must be in [0, 1]");
  ImageRGB out(image.width, image.height);
  for (std::size_t i = 0; i < h.values.size(); ++i) {
    const auto rgb = jet_colormap(h.values[i]);
    for (std::size_t c = 0; c < 3; ++c) {
      const double base = image.pixels[i * 3 + c];
      out.pixels[i * 3 + c] = to_byte((1.0 - blend) * base + blend * rgb[c]);
    }
  }
  return out;
}

ImageRGB hstack(const std::vector<ImageRGB>& images) {
  if (images.empty()) return {};
  const std::size_t height = images.front().height;
  std::size_t width = 0;
  for (const auto& im : images) {
    if (im.height != height) throw ShapeError("hstack: images differ in height");
    width += im.width;
  }
  ImageRGB out(width, height);
  for (std::size_t y = 0; y < height; ++y) {
    std::size_t x0 = 0;
    for (const auto& im : images) {
      std::copy_n(im.at(y, 0), im.width * 3, out.at(y, x0));
      x0 += im.width;
    }
  }
  return out;
}

}  // namespace icam
