#pragma once

// ICAMW001 weight files.
//
//   bytes 0..7    "ICAMW001"
//   bytes 8..15   header length N, unsigned 64-bit little-endian
//   next N bytes  UTF-8 JSON: {"__metadata__": {architecture},
//                              "<tensor>": {"shape": [...], "offset": o, "nbytes": n}, ...}
//   rest          little-endian float32 payload; offsets are relative to its start
//
// Values are widened to double on load. Writing is canonical: sorted JSON
// keys, tensors packed in declaration order, so save(load(f)) == f for files
// this library wrote.

#include <filesystem>
#include <string>
#include <string_view>

#include "icam/model.hpp"

namespace icam {

inline constexpr std::string_view kWeightMagic = "ICAMW001";

std::string serialize_model(const Model& model);
/// Throws ParseError naming the offending field.
Model parse_model(std::string_view bytes);

void save_model(const Model& model, const std::filesystem::path& path);
Model load_model(const std::filesystem::path& path);

}  // namespace icam
