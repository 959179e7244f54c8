#include "minivlm/checkpoint.hpp"

#include "minivlm/config.hpp"
#include "minivlm/errors.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace minivlm {

namespace {

constexpr unsigned char kMagic[4] = {'M', 'M', 'D', 'A'};

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<unsigned char>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<unsigned char>(v >> (8 * i)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  std::vector<unsigned char> take() { return std::move(out_); }

 private:
  std::vector<unsigned char> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const unsigned char> in) : in_(in) {}

  void need(std::size_t n) const {
    if (in_.size() - pos_ < n) throw FormatError("checkpoint: truncated data");
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in_[pos_++]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(in_[pos_++]) << (8 * i);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    const std::uint32_t n = u32();
    need(n);
    std::string s(reinterpret_cast<const char*>(in_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::span<const unsigned char> raw(std::size_t n) {
    need(n);
    auto s = in_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == in_.size(); }

 private:
  std::span<const unsigned char> in_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<unsigned char> encode_checkpoint(const ModelConfig& cfg, const ModelParams& params) {
  Writer w;
  w.bytes(kMagic, 4);
  w.u32(kCheckpointVersion);
  w.str(to_json(cfg).dump());
  const auto ts = tensors(params);
  w.u32(static_cast<std::uint32_t>(ts.size()));
  for (const auto& t : ts) {
    w.str(std::string(to_string(t.group)));
    w.str(t.name);
    w.u32(2);
    w.u64(static_cast<std::uint64_t>(t.value->rows()));
    w.u64(static_cast<std::uint64_t>(t.value->cols()));
    for (Eigen::Index i = 0; i < t.value->size(); ++i) w.f64(t.value->data()[i]);
  }
  return w.take();
}

Checkpoint decode_checkpoint(std::span<const unsigned char> bytes) {
  Reader r(bytes);
  const auto magic = r.raw(4);
  if (std::memcmp(magic.data(), kMagic, 4) != 0) throw FormatError("checkpoint: bad magic (expected MMDA)");
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw FormatError("checkpoint: version " + std::to_string(version) + " is not supported (expected " +
                      std::to_string(kCheckpointVersion) + ")");
  }
  Checkpoint ck;
  try {
    ck.config = model_config_from_json(json::parse(r.str()));
  } catch (const json::exception& e) {
    throw FormatError(std::string("checkpoint: bad config block: ") + e.what());
  } catch (const ConfigError& e) {
    throw FormatError(std::string("checkpoint: bad config block: ") + e.what());
  }
  ck.params = ModelParams::init(ck.config, 0);
  auto ts = tensors(ck.params);
  const std::uint32_t count = r.u32();
  if (count != ts.size()) throw FormatError("checkpoint: record count does not match the model config");
  for (auto& t : ts) {
    const std::string group = r.str();
    const std::string name = r.str();
    if (group != to_string(t.group) || name != t.name) {
      throw FormatError("checkpoint: expected record " + t.name + ", found " + name);
    }
    if (r.u32() != 2) throw FormatError("checkpoint: unsupported rank in " + name);
    const std::uint64_t rows = r.u64();
    const std::uint64_t cols = r.u64();
    if (rows != static_cast<std::uint64_t>(t.value->rows()) || cols != static_cast<std::uint64_t>(t.value->cols())) {
      throw FormatError("checkpoint: shape mismatch in " + name);
    }
    r.need(rows * cols * 8);
    for (Eigen::Index i = 0; i < t.value->size(); ++i) t.value->data()[i] = r.f64();
  }
  if (!r.done()) throw FormatError("checkpoint: trailing bytes");
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const ModelConfig& cfg,
                     const ModelParams& params) {
  const auto bytes = encode_checkpoint(cfg, params);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("checkpoint: cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError("checkpoint: write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("checkpoint: cannot open " + path.string());
  const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

}  // namespace minivlm
