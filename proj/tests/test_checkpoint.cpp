#include "doctest.h"

#include "support.hpp"

#include "minivlm/checkpoint.hpp"
#include "minivlm/errors.hpp"

#include <cstring>
#include <filesystem>

using namespace minivlm;

TEST_CASE("checkpoint round-trips bit-exactly") {
  const ModelConfig cfg = testing::small_model();
  const ModelParams p = ModelParams::init(cfg, 17);
  const auto bytes = encode_checkpoint(cfg, p);
  CHECK(std::memcmp(bytes.data(), "MMDA", 4) == 0);
  CHECK(bytes[4] == kCheckpointVersion);
  CHECK(bytes[5] == 0);
  const Checkpoint ck = decode_checkpoint(bytes);
  CHECK(ck.config == cfg);
  CHECK(encode_checkpoint(ck.config, ck.params) == bytes);
  const auto a = tensors(p);
  const auto b = tensors(ck.params);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) REQUIRE(*a[i].value == *b[i].value);

  const auto path = std::filesystem::temp_directory_path() / "minivlm_test_roundtrip.mmda";
  save_checkpoint(path, cfg, p);
  CHECK(encode_checkpoint(cfg, load_checkpoint(path).params) == bytes);
  std::filesystem::remove(path);
}

TEST_CASE("checkpoint decoding rejects damage and version mismatch") {
  const ModelConfig cfg = testing::small_model();
  const auto bytes = encode_checkpoint(cfg, ModelParams::init(cfg, 1));
  auto bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_AS(decode_checkpoint(bad), FormatError);
  bad = bytes;
  bad[4] = 2;
  try {
    decode_checkpoint(bad);
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("version") != std::string::npos);
  }
  bad = bytes;
  bad.push_back(0);
  CHECK_THROWS_AS(decode_checkpoint(bad), FormatError);
  bad = bytes;
  bad.resize(bytes.size() - 3);
  CHECK_THROWS_AS(decode_checkpoint(bad), FormatError);
  CHECK_THROWS_AS(load_checkpoint("/nonexistent/x.mmda"), std::exception);
  // A checkpoint whose tensors disagree with its embedded config.
  ModelConfig other = cfg;
  other.decoder.vocab = 65;
  auto mismatched = encode_checkpoint(other, ModelParams::init(cfg, 1));
  CHECK_THROWS_AS(decode_checkpoint(mismatched), FormatError);
}
