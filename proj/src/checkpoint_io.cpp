#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "aesthetic/error.hpp"
#include "aesthetic/model.hpp"

namespace aesthetic {
namespace {

constexpr char kMagic[4] = {'A', 'E', 'S', 'K'};
constexpr std::size_t kHeaderSize = 4 + 2 + 8;
constexpr std::size_t kTrailerSize = 4;

class Writer {
 public:
  void u8(std::uint8_t v) { bytes_.push_back(v); }
  void u16(std::uint16_t v) { put(v, 2); }
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void doubles(const std::vector<double>& v) {
    u64(v.size());
    for (double d : v) f64(d);
  }
  void bytes(const std::string& s) {
    u64(s.size());
    bytes_.insert(bytes_.end(), s.begin(), s.end());
  }
  std::vector<std::uint8_t>& data() { return bytes_; }

 private:
  void put(std::uint64_t v, int width) {
    for (int i = 0; i < width; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> bytes_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(get(1)); }
  std::uint16_t u16() { return static_cast<std::uint16_t>(get(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
  std::uint64_t u64() { return get(8); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::vector<double> doubles() {
    const std::uint64_t n = u64();
    need(n * 8);
    std::vector<double> v(n);
    for (double& d : v) d = f64();
    return v;
  }
  std::string bytes() {
    const std::uint64_t n = u64();
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::uint64_t n) const {
    if (n > bytes_.size() - pos_) throw Error(ErrorCode::CorruptCheckpoint, "payload ends early");
  }
  std::uint64_t get(int width) {
    need(static_cast<std::uint64_t>(width));
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += static_cast<std::size_t>(width);
    return v;
  }
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

std::uint32_t crc_of(std::span<const std::uint8_t> bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, bytes.data(), static_cast<uInt>(bytes.size()));
  return static_cast<std::uint32_t>(crc);
}

void write_payload(Writer& w, const Checkpoint& ckpt) {
  const ModelConfig& cfg = ckpt.config;
  w.u32(static_cast<std::uint32_t>(cfg.input_size));
  w.u32(static_cast<std::uint32_t>(cfg.input_channels));
  w.u32(static_cast<std::uint32_t>(cfg.conv_blocks.size()));
  for (const ConvBlock& b : cfg.conv_blocks) {
    w.u32(static_cast<std::uint32_t>(b.filters));
    w.u32(static_cast<std::uint32_t>(b.kernel));
    w.u8(b.pool ? 1 : 0);
  }
  w.u32(static_cast<std::uint32_t>(cfg.dense_widths.size()));
  for (int width : cfg.dense_widths) w.u32(static_cast<std::uint32_t>(width));
  w.u64(cfg.seed);
  w.doubles(ckpt.parameters);
  w.u32(static_cast<std::uint32_t>(ckpt.frozen.size()));
  for (std::uint8_t f : ckpt.frozen) w.u8(f ? 1 : 0);
  w.u8(static_cast<std::uint8_t>(ckpt.optimizer.kind));
  w.u64(ckpt.optimizer.step);
  w.doubles(ckpt.optimizer.first);
  w.doubles(ckpt.optimizer.second);
  w.u64(ckpt.epoch);
  w.bytes(ckpt.rng_state);
}

Checkpoint read_payload(Reader& r) {
  Checkpoint ckpt;
  ModelConfig& cfg = ckpt.config;
  cfg.input_size = static_cast<int>(r.u32());
  cfg.input_channels = static_cast<int>(r.u32());
  const std::uint32_t n_conv = r.u32();
  if (n_conv > 1024) throw Error(ErrorCode::CorruptCheckpoint, "implausible conv block count");
  cfg.conv_blocks.clear();
  for (std::uint32_t i = 0; i < n_conv; ++i) {
    ConvBlock b;
    b.filters = static_cast<int>(r.u32());
    b.kernel = static_cast<int>(r.u32());
    b.pool = r.u8() != 0;
    cfg.conv_blocks.push_back(b);
  }
  const std::uint32_t n_dense = r.u32();
  if (n_dense > 1024) throw Error(ErrorCode::CorruptCheckpoint, "implausible dense layer count");
  cfg.dense_widths.clear();
  for (std::uint32_t i = 0; i < n_dense; ++i) cfg.dense_widths.push_back(static_cast<int>(r.u32()));
  cfg.seed = r.u64();
  ckpt.parameters = r.doubles();
  const std::uint32_t n_layers = r.u32();
  if (n_layers > 4096) throw Error(ErrorCode::CorruptCheckpoint, "implausible layer count");
  for (std::uint32_t i = 0; i < n_layers; ++i) ckpt.frozen.push_back(r.u8());
  const std::uint8_t kind = r.u8();
  if (kind > static_cast<std::uint8_t>(OptimizerKind::Adam)) {
    throw Error(ErrorCode::CorruptCheckpoint, "unknown optimizer kind");
  }
  ckpt.optimizer.kind = static_cast<OptimizerKind>(kind);
  ckpt.optimizer.step = r.u64();
  ckpt.optimizer.first = r.doubles();
  ckpt.optimizer.second = r.doubles();
  ckpt.epoch = r.u64();
  ckpt.rng_state = r.bytes();
  if (!r.done()) throw Error(ErrorCode::CorruptCheckpoint, "trailing bytes in payload");
  return ckpt;
}

void check_consistency(const Checkpoint& ckpt) {
  std::vector<LayerShape> layers;
  try {
    layers = layer_layout(ckpt.config);
  } catch (const Error& e) {
    throw Error(ErrorCode::CorruptCheckpoint, std::string("stored architecture is invalid: ") + e.what());
  }
  if (ckpt.parameters.size() != layers.back().end()) {
    throw Error(ErrorCode::CorruptCheckpoint, "parameter count does not match architecture");
  }
  if (ckpt.frozen.size() != layers.size()) {
    throw Error(ErrorCode::CorruptCheckpoint, "frozen mask length does not match layer count");
  }
  const std::size_t n = ckpt.parameters.size();
  const auto& st = ckpt.optimizer;
  const bool ok = (st.kind == OptimizerKind::None && st.first.empty() && st.second.empty()) ||
                  (st.kind == OptimizerKind::SGD && st.first.size() == n && st.second.empty()) ||
                  (st.kind == OptimizerKind::Adam && st.first.size() == n && st.second.size() == n);
  if (!ok) throw Error(ErrorCode::CorruptCheckpoint, "optimizer state does not match parameter count");
}

}  // namespace

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt) {
  Writer payload;
  write_payload(payload, ckpt);
  Writer out;
  for (char c : kMagic) out.u8(static_cast<std::uint8_t>(c));
  out.u16(kCheckpointVersion);
  out.u64(payload.data().size());
  auto& bytes = out.data();
  bytes.insert(bytes.end(), payload.data().begin(), payload.data().end());
  out.u32(crc_of(bytes));
  return std::move(out.data());
}

Checkpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kHeaderSize + kTrailerSize) {
    throw Error(ErrorCode::CorruptCheckpoint, "file too short (" + std::to_string(bytes.size()) + " bytes)");
  }
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw Error(ErrorCode::CorruptCheckpoint, "bad magic");
  Reader header(bytes.subspan(4, kHeaderSize - 4));
  const std::uint16_t version = header.u16();
  if (version != kCheckpointVersion) {
    throw Error(ErrorCode::CorruptCheckpoint, "unsupported format version " + std::to_string(version) +
                                                  " (expected " + std::to_string(kCheckpointVersion) + ")");
  }
  const std::uint64_t length = header.u64();
  if (length != bytes.size() - kHeaderSize - kTrailerSize) {
    throw Error(ErrorCode::CorruptCheckpoint, "payload length " + std::to_string(length) +
                                                  " does not match file size");
  }
  const auto body = bytes.first(bytes.size() - kTrailerSize);
  Reader trailer(bytes.last(kTrailerSize));
  if (trailer.u32() != crc_of(body)) throw Error(ErrorCode::CorruptCheckpoint, "checksum mismatch");
  Reader payload(bytes.subspan(kHeaderSize, length));
  Checkpoint ckpt = read_payload(payload);
  check_consistency(ckpt);
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const auto bytes = serialize_checkpoint(ckpt);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write checkpoint " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::IoError, "short write to " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open checkpoint " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_checkpoint(bytes);
}

}  // namespace aesthetic
