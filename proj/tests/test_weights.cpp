#include <doctest.h>

#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "icam/checksum.hpp"
#include "icam/error.hpp"
#include "icam/weights_io.hpp"
#include "support.hpp"

using nlohmann::json;

namespace {

struct Parts {
  json header;
  std::string payload;
};

Parts split(const std::string& bytes) {
  std::uint64_t len = 0;
  for (int i = 7; i >= 0; --i) len = (len << 8) | static_cast<unsigned char>(bytes[8 + i]);
  return {json::parse(bytes.substr(16, len)), bytes.substr(16 + len)};
}

std::string join(const json& header, const std::string& payload, std::string magic = "ICAMW001") {
  const std::string h = header.dump();
  std::string out = magic;
  std::uint64_t len = h.size();
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((len >> (8 * i)) & 0xff));
  return out + h + payload;
}

std::string parse_field(const std::string& bytes) {
  try {
    (void)icam::parse_model(bytes);
  } catch (const icam::ParseError& e) {
    return e.field();
  }
  return "<none>";
}

}  // namespace

TEST_SUITE("weights") {
  TEST_CASE("save, load, save is byte-identical") {
    test::TempDir dir("weights_roundtrip");
    const icam::Model m = icam::build_fixture_model(42);
    icam::save_model(m, dir / "a.bin");
    const icam::Model back = icam::load_model(dir / "a.bin");
    icam::save_model(back, dir / "b.bin");
    CHECK(icam::sha256_file(dir / "a.bin") == icam::sha256_file(dir / "b.bin"));
    CHECK(back.spec() == m.spec());
    for (std::size_t i = 0; i < m.parameters().size(); ++i) CHECK(back.parameters()[i].value == m.parameters()[i].value);
  }

  TEST_CASE("layout: magic, little-endian length, sorted json, packed float32 payload") {
    const std::string bytes = icam::serialize_model(icam::build_fixture_model(3));
    CHECK(bytes.substr(0, 8) == "ICAMW001");
    const Parts p = split(bytes);
    CHECK(p.header.contains("__metadata__"));
    std::size_t expected = 0;
    for (const auto& [name, shape] : icam::parameter_layout(icam::fixture_spec())) {
      const auto& entry = p.header.at(name);
      CHECK(entry.at("offset").get<std::size_t>() == expected);
      CHECK(entry.at("nbytes").get<std::size_t>() == 4 * icam::shape_size(shape));
      expected += 4 * icam::shape_size(shape);
    }
    CHECK(p.payload.size() == expected);
    // First payload value is block1.weight[0] as float32 LE.
    float first = 0.0f;
    std::memcpy(&first, p.payload.data(), 4);
    CHECK(static_cast<double>(first) == icam::build_fixture_model(3).conv_weight(0)[0]);
  }

  TEST_CASE("fixture checksum for seed 7 is stable") {
    // Recorded from the first build; any change to the format or the
    // fixture generator shows up here.
    const std::string golden = "b29b488155fc2eb405aa76423a6212be2f6e9c72040acf99a214eed5f1bf70d2";
    CHECK(icam::sha256_hex(icam::serialize_model(icam::build_fixture_model(7))) == golden);
    CHECK(icam::sha256_hex(icam::serialize_model(icam::build_fixture_model(8))) != golden);
  }

  TEST_CASE("sha256 known answers") {
    CHECK(icam::sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(icam::sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  }

  TEST_CASE("each corruption names its field") {
    const std::string good = icam::serialize_model(icam::build_fixture_model(1));
    const Parts p = split(good);

    CHECK(parse_field(join(p.header, p.payload, "ICAMW002")) == "magic");
    CHECK(parse_field("ICAM") == "magic");
    CHECK(parse_field(good.substr(0, 12)) == "header_length");
    CHECK(parse_field(good.substr(0, 40)) == "header");

    std::string bad_json = good;
    bad_json[16] = '[';
    bad_json[17] = '}';
    CHECK(parse_field(bad_json) == "header");

    json h = p.header;
    h["block2.bias"]["shape"] = {15};
    CHECK(parse_field(join(h, p.payload)) == "block2.bias.shape");

    h = p.header;
    h["head.bias"]["nbytes"] = 16;
    CHECK(parse_field(join(h, p.payload)) == "head.bias.nbytes");

    CHECK(parse_field(join(p.header, p.payload.substr(0, p.payload.size() - 4))) == "head.bias.offset");

    h = p.header;
    h["head.bias"]["offset"] = 0;
    CHECK(parse_field(join(h, p.payload)) == "offset");

    h = p.header;
    h.erase("head.weight");
    CHECK(parse_field(join(h, p.payload)) == "head.weight");

    h = p.header;
    h.erase("__metadata__");
    CHECK(parse_field(join(h, p.payload)) == "__metadata__");
  }

  TEST_CASE("missing file is an io error") {
    CHECK_THROWS_AS(icam::load_model("/nonexistent/model.bin"), icam::IoError);
  }
}
