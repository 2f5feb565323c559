#include "adtrack/checkpoint.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>

namespace adtrack {

namespace {

constexpr std::size_t kMagicLen = sizeof(kCheckpointMagic) - 1;

class Writer {
 public:
  void u8(std::uint8_t v) { bytes_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(std::uint8_t(v >> (8 * i)));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void str(const std::string& s) {
    u32(std::uint32_t(s.size()));
    bytes_.insert(bytes_.end(), s.begin(), s.end());
  }
  void raw(const char* p, std::size_t n) { bytes_.insert(bytes_.end(), p, p + n); }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::size_t offset() const { return pos_; }
  void need(std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n) throw FormatError(std::string("truncated ") + what, pos_);
  }
  std::uint8_t u8(const char* what) {
    need(1, what);
    return bytes_[pos_++];
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  float f32() { return std::bit_cast<float>(u32("tensor values")); }
  std::string str(const char* what) {
    const std::size_t at = pos_;
    const std::uint32_t n = u32(what);
    if (bytes_.size() - pos_ < n) throw FormatError(std::string("truncated ") + what, at);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::span<const std::uint8_t> bytes() const { return bytes_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

void put_tensor(Writer& w, const std::string& name, const Tensor& t) {
  w.str(name);
  w.u8(std::uint8_t(t.rank()));
  for (Index e : t.shape()) w.u32(std::uint32_t(e));
  for (Index i = 0; i < t.size(); ++i) w.f32(static_cast<float>(t[i]));
}

std::string conv_name(int block, int layer, const char* part) {
  return "backbone.b" + std::to_string(block + 1) + ".c" + std::to_string(layer + 1) + "." + part;
}

std::string phi_name(int gate) { return "gates.phi" + std::to_string(gate + 1); }

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
  std::vector<std::pair<std::string, Tensor>> entries;
  nlohmann::json meta = ckpt.meta;
  if (ckpt.weights) {
    meta["preset"] = ckpt.weights->config.preset;
    meta["input_channels"] = ckpt.weights->config.input_channels;
    for (int b = 0; b < kNumDepths; ++b)
      for (std::size_t l = 0; l < ckpt.weights->blocks[b].size(); ++l) {
        const ConvSpec& conv = ckpt.weights->blocks[b][l];
        entries.emplace_back(conv_name(b, int(l), "kernel"), conv.kernel);
        entries.emplace_back(conv_name(b, int(l), "bias"), Tensor({conv.bias->size()}, *conv.bias));
      }
  }
  if (ckpt.gates)
    for (int g = 0; g < kNumGates; ++g)
      entries.emplace_back(phi_name(g), Tensor({GateWeights::RowsAtCompileTime}, Vector(ckpt.gates->phi[g])));

  Writer w;
  w.raw(kCheckpointMagic, kMagicLen);
  w.u32(std::uint32_t(entries.size()));
  for (const auto& [name, tensor] : entries) put_tensor(w, name, tensor);
  w.str(meta.dump());
  return w.take();
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  r.need(kMagicLen, "magic");
  if (std::memcmp(bytes.data(), kCheckpointMagic, kMagicLen) != 0) throw FormatError("bad magic", 0);
  for (std::size_t i = 0; i < kMagicLen; ++i) r.u8("magic");

  const std::uint32_t count = r.u32("entry count");
  std::map<std::string, Tensor> tensors;
  for (std::uint32_t e = 0; e < count; ++e) {
    std::string name = r.str("entry name");
    const std::size_t rank_at = r.offset();
    const int rank = r.u8("rank");
    if (rank < 1 || rank > 4) throw FormatError("tensor rank out of range", rank_at);
    Shape shape;
    std::uint64_t n = 1;
    for (int i = 0; i < rank; ++i) {
      const std::size_t at = r.offset();
      const std::uint32_t extent = r.u32("extents");
      if (extent == 0) throw FormatError("zero extent", at);
      n *= extent;
      if (n > (bytes.size() - r.offset()) / 4) throw FormatError("extent overflow", at);
      shape.push_back(Index(extent));
    }
    r.need(std::size_t(n) * 4, "tensor values");
    Vector values(static_cast<Index>(n));
    for (std::uint64_t i = 0; i < n; ++i) values[Index(i)] = double(r.f32());
    if (!tensors.emplace(std::move(name), Tensor(shape, std::move(values))).second)
      throw FormatError("duplicate tensor name", rank_at);
  }
  const std::size_t meta_at = r.offset();
  const std::string meta_text = r.str("metadata");
  if (r.offset() != bytes.size()) throw FormatError("trailing bytes", r.offset());

  Checkpoint ckpt;
  try {
    ckpt.meta = nlohmann::json::parse(meta_text);
  } catch (const nlohmann::json::exception&) {
    throw FormatError("metadata is not valid JSON", meta_at);
  }
  if (!ckpt.meta.is_object()) throw FormatError("metadata must be a JSON object", meta_at);

  const auto take = [&](const std::string& name, const Shape& shape) {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw FormatError("missing tensor " + name, meta_at);
    if (it->second.shape() != shape) throw FormatError("shape mismatch for " + name, meta_at);
    Tensor t = std::move(it->second);
    tensors.erase(it);
    return t;
  };

  if (tensors.count(conv_name(0, 0, "kernel"))) {
    if (!ckpt.meta.contains("preset")) throw FormatError("backbone without preset metadata", meta_at);
    BackboneConfig config;
    try {
      config = BackboneConfig::from_preset(ckpt.meta["preset"].get<std::string>());
    } catch (const std::exception&) {
      throw FormatError("unknown preset in metadata", meta_at);
    }
    BackboneWeights weights = init_weights(config, 0);
    for (int b = 0; b < kNumDepths; ++b)
      for (std::size_t l = 0; l < weights.blocks[b].size(); ++l) {
        ConvSpec& conv = weights.blocks[b][l];
        conv.kernel = take(conv_name(b, int(l), "kernel"), conv.kernel.shape());
        conv.bias = take(conv_name(b, int(l), "bias"), {conv.bias->size()}).flat();
      }
    ckpt.weights = std::move(weights);
  }
  if (tensors.count(phi_name(0))) {
    GateParams gates;
    for (int g = 0; g < kNumGates; ++g)
      gates.phi[g] = take(phi_name(g), {GateWeights::RowsAtCompileTime}).flat();
    ckpt.gates = gates;
  }
  if (!tensors.empty()) throw FormatError("unexpected tensor " + tensors.begin()->first, meta_at);
  return ckpt;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(path.string() + ": cannot open");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error(tmp.string() + ": cannot write");
    out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
    if (!out) throw std::runtime_error(tmp.string() + ": write failed");
  }
  std::filesystem::rename(tmp, path);
}

void write_file_atomic(const std::filesystem::path& path, const std::string& text) {
  write_file_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  write_file_atomic(path, encode_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(read_file(path)); }

std::string checksum_hex(std::span<const std::uint8_t> bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (std::uint8_t b : bytes) {
    h ^= b;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string weights_checksum(const BackboneWeights& weights) {
  const Vector flat = weights.flatten();
  return checksum_hex(std::span(reinterpret_cast<const std::uint8_t*>(flat.data()),
                                std::size_t(flat.size()) * sizeof(double)));
}

}  // namespace adtrack
