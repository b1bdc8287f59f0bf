#include "reprog/checkpoint.hpp"

#include <openssl/sha.h>

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>

#include "reprog/errors.hpp"

namespace reprog {

namespace {


void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f64(std::vector<std::uint8_t>& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}

std::uint32_t checked_u32(std::size_t v) {
  if (v > 0xFFFFFFFFu) throw ShapeError("dimension too large for checkpoint manifest");
  return static_cast<std::uint32_t>(v);
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

  void need(std::size_t n, const char* what) const {
    if (remaining() < n) {
      throw ParseError(std::string("truncated checkpoint while reading ") + what + ": need " +
                           std::to_string(n) + " bytes, have " + std::to_string(remaining()),
                       pos_);
    }
  }

  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }

  double f64(const char* what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return std::bit_cast<double>(v);
  }

  std::span<const std::uint8_t> take(std::size_t n, const char* what) {
    need(n, what);
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> manifest_bytes(const FrozenModel& model) {
  std::vector<std::uint8_t> out;
  put_u32(out, checked_u32(model.layers().size()));
  for (const auto& l : model.layers()) {
    put_u32(out, static_cast<std::uint32_t>(l.kind));
    put_u32(out, checked_u32(l.in_dim));
    put_u32(out, checked_u32(l.out_dim));
  }
  return out;
}

std::vector<std::uint8_t> payload_bytes(const FrozenModel& model) {
  std::vector<std::uint8_t> out;
  out.reserve(8 * (2 + model.parameter_count()));
  put_f64(out, model.input_range().lo);
  put_f64(out, model.input_range().hi);
  for (const auto& l : model.layers()) {
    for (double w : l.weight) put_f64(out, w);
    for (double b : l.bias) put_f64(out, b);
  }
  return out;
}

std::vector<std::uint8_t> encode_checkpoint(const FrozenModel& model) {
  const auto manifest = manifest_bytes(model);
  const auto payload = payload_bytes(model);
  std::vector<std::uint8_t> body(manifest);
  body.insert(body.end(), payload.begin(), payload.end());
  const auto digest = sha256(body);

  std::vector<std::uint8_t> out(kCheckpointMagic.begin(), kCheckpointMagic.end());
  put_u32(out, kCheckpointVersion);
  put_u32(out, checked_u32(manifest.size()));
  out.insert(out.end(), body.begin(), body.end());
  out.insert(out.end(), digest.begin(), digest.end());
  return out;
}

FrozenModel decode_checkpoint(std::span<const std::uint8_t> bytes) {
  Reader in(bytes);
  auto magic = in.take(kCheckpointMagic.size(), "magic");
  if (std::memcmp(magic.data(), kCheckpointMagic.data(), kCheckpointMagic.size()) != 0) {
    throw ParseError("bad checkpoint magic (expected \"RPKMODEL\")", 0);
  }
  const std::size_t version_at = in.offset();
  const std::uint32_t version = in.u32("version");
  if (version != kCheckpointVersion) {
    throw ParseError("unsupported checkpoint version " + std::to_string(version), version_at);
  }
  const std::uint32_t manifest_len = in.u32("manifest length");
  const std::size_t body_start = in.offset();

  const std::size_t manifest_start = in.offset();
  const std::uint32_t layer_count = in.u32("layer count");
  if (manifest_len != 4 + 12ull * layer_count) {
    throw ParseError("manifest length " + std::to_string(manifest_len) +
                         " inconsistent with layer count " + std::to_string(layer_count),
                     manifest_start);
  }
  std::vector<LayerSpec> layers;
  for (std::uint32_t i = 0; i < layer_count; ++i) {
    const std::size_t at = in.offset();
    const std::uint32_t kind = in.u32("layer kind");
    if (kind > static_cast<std::uint32_t>(LayerKind::flatten)) {
      throw ParseError("unknown layer kind " + std::to_string(kind), at);
    }
    LayerSpec l;
    l.kind = static_cast<LayerKind>(kind);
    l.in_dim = in.u32("layer in_dim");
    l.out_dim = in.u32("layer out_dim");
    layers.push_back(std::move(l));
  }

  InputRange range;
  range.lo = in.f64("input range");
  range.hi = in.f64("input range");
  for (auto& l : layers) {
    if (l.kind != LayerKind::dense) continue;
    const std::size_t count = l.in_dim * l.out_dim;
    in.need(8 * (count + l.out_dim), "dense parameters");
    l.weight.resize(count);
    for (double& w : l.weight) w = in.f64("weight");
    l.bias.resize(l.out_dim);
    for (double& b : l.bias) b = in.f64("bias");
  }
  const std::size_t body_end = in.offset();
  const std::size_t trailer_at = in.offset();
  auto stored = in.take(32, "digest trailer");
  if (in.remaining() != 0) {
    throw ParseError(std::to_string(in.remaining()) + " unexpected bytes after digest trailer",
                     in.offset());
  }
  const auto actual = sha256(bytes.subspan(body_start, body_end - body_start));
  if (!std::equal(actual.begin(), actual.end(), stored.begin())) {
    throw ParseError("checkpoint digest mismatch: stored " + to_hex(stored) + ", computed " +
                         to_hex(actual),
                     trailer_at);
  }
  try {
    return FrozenModel(std::move(layers), range);
  } catch (const std::exception& e) {
    throw ParseError(std::string("invalid model in checkpoint: ") + e.what(), manifest_start);
  }
}

void save_checkpoint(const FrozenModel& model, const std::filesystem::path& path) {
  const auto bytes = encode_checkpoint(model);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

FrozenModel load_checkpoint(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  return decode_checkpoint(bytes);
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::array<std::uint8_t, 32> sha256(std::span<const std::uint8_t> bytes) {
  std::array<std::uint8_t, 32> out{};
  SHA256(bytes.data(), bytes.size(), out.data());
  return out;
}

std::string to_hex(std::span<const std::uint8_t> bytes) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string s;
  s.reserve(bytes.size() * 2);
  for (std::uint8_t b : bytes) {
    s.push_back(kDigits[b >> 4]);
    s.push_back(kDigits[b & 0xF]);
  }
  return s;
}

}  // namespace reprog
