#include "icam/weights_io.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "icam/error.hpp"

namespace icam {
namespace {

using nlohmann::json;

void put_u64_le(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint64_t get_u64_le(std::string_view bytes, std::size_t at) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) {
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[at + i])) << (8 * i);
  }
  return v;
}

void put_f32_le(std::string& out, double value) {
  const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(value));
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
}

double get_f32_le(const char* p) {
  std::uint32_t bits = 0;
  for (int i = 0; i < 4; ++i) bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(p[i])) << (8 * i);
  return static_cast<double>(std::bit_cast<float>(bits));
}

json metadata_json(const ModelSpec& spec) {
  json blocks = json::array();
  for (const auto& b : spec.blocks) {
    blocks.push_back({{"name", b.name},
                      {"in_channels", b.in_channels},
                      {"out_channels", b.out_channels},
                      {"kernel_size", b.kernel_size},
                      {"stride", b.stride},
                      {"padding", b.padding}});
  }
  return {{"format", std::string(kWeightMagic)},
          {"input_shape", spec.input_shape},
          {"num_classes", spec.num_classes},
          {"blocks", blocks}};
}

template <typename T>
T field(const json& obj, const std::string& key, const std::string& path) {
  if (!obj.is_object() || !obj.contains(key)) {
    throw ParseError(path + "." + key, "missing header field '" + path + "." + key + "'");
  }
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ParseError(path + "." + key, "header field '" + path + "." + key + "' has the wrong type");
  }
}

ModelSpec spec_from_metadata(const json& header) {
  if (!header.contains("__metadata__")) {
    throw ParseError("__metadata__", "header has no '__metadata__' entry");
  }
  const json& meta = header.at("__metadata__");
  const std::string root = "__metadata__";
  ModelSpec spec;
  spec.input_shape = field<Shape>(meta, "input_shape", root);
  spec.num_classes = field<std::size_t>(meta, "num_classes", root);
  const json blocks = field<json>(meta, "blocks", root);
  if (!blocks.is_array()) throw ParseError(root + ".blocks", "'__metadata__.blocks' must be an array");
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const std::string path = root + ".blocks[" + std::to_string(i) + "]";
    ConvBlockSpec b;
    b.name = field<std::string>(blocks[i], "name", path);
    b.in_channels = field<std::size_t>(blocks[i], "in_channels", path);
    b.out_channels = field<std::size_t>(blocks[i], "out_channels", path);
    b.kernel_size = field<std::size_t>(blocks[i], "kernel_size", path);
    b.stride = field<std::size_t>(blocks[i], "stride", path);
    b.padding = field<std::size_t>(blocks[i], "padding", path);
    spec.blocks.push_back(std::move(b));
  }
  try {
    spec.validate();
  } catch (const Error& e) {
    throw ParseError(root, std::string("inconsistent architecture: ") + e.what());
  }
  return spec;
}

}  // namespace

std::string serialize_model(const Model& model) {
  json header = json::object();
  header["__metadata__"] = metadata_json(model.spec());
  std::string payload;
  for (const auto& p : model.parameters()) {
    const std::size_t offset = payload.size();
    for (double v : p.value.values()) put_f32_le(payload, v);
    header[p.name] = {{"shape", p.value.shape()}, {"offset", offset}, {"nbytes", payload.size() - offset}};
  }
  const std::string text = header.dump();
  std::string out(kWeightMagic);
  put_u64_le(out, text.size());
  out += text;
  out += payload;
  return out;
}

Model parse_model(std::string_view bytes) {
  if (bytes.size() < kWeightMagic.size() || bytes.substr(0, kWeightMagic.size()) != kWeightMagic) {
    throw ParseError("magic", "bad magic: not an ICAMW001 weight file");
  }
  if (bytes.size() < 16) throw ParseError("header_length", "truncated header: missing header length");
  const std::uint64_t header_len = get_u64_le(bytes, 8);
  if (header_len > bytes.size() - 16) {
    throw ParseError("header", "truncated header: header length " + std::to_string(header_len) +
                                   " exceeds file size");
  }
  json header;
  try {
    header = json::parse(bytes.substr(16, header_len));
  } catch (const json::exception& e) {
    throw ParseError("header", std::string("invalid header json: ") + e.what());
  }
  if (!header.is_object()) throw ParseError("header", "invalid header json: not an object");

  const ModelSpec spec = spec_from_metadata(header);
  const std::string_view payload = bytes.substr(16 + header_len);

  std::vector<NamedTensor> params;
  std::vector<std::pair<std::size_t, std::size_t>> extents;
  for (const auto& [name, shape] : parameter_layout(spec)) {
    if (!header.contains(name)) throw ParseError(name, "missing tensor '" + name + "'");
    const json& entry = header.at(name);
    const auto file_shape = field<Shape>(entry, "shape", name);
    const auto offset = field<std::uint64_t>(entry, "offset", name);
    const auto nbytes = field<std::uint64_t>(entry, "nbytes", name);
    if (file_shape != shape) {
      throw ParseError(name + ".shape", "tensor '" + name + "' has shape " + shape_to_string(file_shape) +
                                            ", architecture requires " + shape_to_string(shape));
    }
    if (nbytes != shape_size(shape) * 4) {
      throw ParseError(name + ".nbytes", "tensor '" + name + "' nbytes " + std::to_string(nbytes) +
                                             " does not match shape " + shape_to_string(shape));
    }
    if (offset > payload.size() || nbytes > payload.size() - offset) {
      throw ParseError(name + ".offset", "truncated payload: tensor '" + name + "' ends past end of file");
    }
    extents.emplace_back(offset, offset + nbytes);
    Tensor t(shape);
    const char* src = payload.data() + offset;
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = get_f32_le(src + 4 * i);
    params.push_back({name, std::move(t)});
  }
  std::vector<std::pair<std::size_t, std::size_t>> sorted = extents;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 1; i < sorted.size(); ++i) {
    if (sorted[i].first < sorted[i - 1].second) {
      throw ParseError("offset", "tensor byte ranges overlap in payload");
    }
  }
  return Model(spec, std::move(params));
}

void save_model(const Model& model, const std::filesystem::path& path) {
  const std::string bytes = serialize_model(model);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

Model load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return parse_model(buf.str());
  } catch (const ParseError& e) {
    throw ParseError(e.field(), path.string() + ": " + e.what());
  }
}

}  // namespace icam
