#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "tsnmt/errors.hpp"
#include "tsnmt/model.hpp"

namespace tsnmt {

namespace {

constexpr char kMagic[4] = {'P', 'D', 'S', 'T'};
constexpr std::uint32_t kVersion = 1;

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out.insert(out.end(), b, b + n);
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double d) {
    const auto v = std::bit_cast<std::uint64_t>(d);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> out;
};

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& b) : buf(b) {}
  void need(std::size_t n) {
    if (pos + n > buf.size()) throw DataError("checkpoint truncated at byte " + std::to_string(pos));
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(buf[pos++]) << (8 * i);
    return v;
  }
  double f64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[pos++]) << (8 * i);
    return std::bit_cast<double>(v);
  }
  std::string str(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(buf.data() + pos), n);
    pos += n;
    return s;
  }
  const std::vector<std::uint8_t>& buf;
  std::size_t pos = 0;
};

}  // namespace

std::vector<std::uint8_t> ModelParams::serialize() const {
  if (tensors_.size() != kNumTensors) throw ContractError("serialize: uninitialized parameters");
  Writer w;
  w.bytes(kMagic, 4);
  w.u32(kVersion);
  for (std::size_t d : {config_.src_vocab, config_.tgt_vocab, config_.embed_dim, config_.hidden_dim,
                        config_.attention_dim}) {
    w.u32(static_cast<std::uint32_t>(d));
  }
  w.u32(static_cast<std::uint32_t>(tensors_.size()));
  for (std::size_t i = 0; i < tensors_.size(); ++i) {
    const std::string_view n = name(i);
    w.u32(static_cast<std::uint32_t>(n.size()));
    w.bytes(n.data(), n.size());
    w.u32(2);
    w.u32(static_cast<std::uint32_t>(tensors_[i].rows()));
    w.u32(static_cast<std::uint32_t>(tensors_[i].cols()));
    for (double v : tensors_[i].values()) w.f64(v);
  }
  return std::move(w.out);
}

ModelParams ModelParams::deserialize(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  if (r.str(4) != std::string_view(kMagic, 4)) throw DataError("not a checkpoint (bad magic)");
  const std::uint32_t version = r.u32();
  if (version != kVersion) throw DataError("unsupported checkpoint version " + std::to_string(version));
  ModelConfig cfg;
  cfg.src_vocab = r.u32();
  cfg.tgt_vocab = r.u32();
  cfg.embed_dim = r.u32();
  cfg.hidden_dim = r.u32();
  cfg.attention_dim = r.u32();
  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    throw DataError(std::string("checkpoint: ") + e.what());
  }
  ModelParams p = zeros(cfg);
  const std::uint32_t count = r.u32();
  if (count != kNumTensors) {
    throw DataError("checkpoint holds " + std::to_string(count) + " tensors, expected " +
                    std::to_string(kNumTensors));
  }
  for (std::size_t i = 0; i < count; ++i) {
    const std::string n = r.str(r.u32());
    if (n != name(i)) throw DataError("checkpoint tensor " + std::to_string(i) + " is '" + n + "', expected '" +
                                      std::string(name(i)) + "'");
    const std::uint32_t rank = r.u32();
    std::vector<std::size_t> dims;
    for (std::uint32_t k = 0; k < rank; ++k) dims.push_back(r.u32());
    Tensor& t = p.tensors_[i];
    if (rank != 2 || dims[0] != t.rows() || dims[1] != t.cols()) {
      throw DataError("checkpoint tensor '" + n + "' has a shape inconsistent with its dimension config");
    }
    for (double& v : t.values()) v = r.f64();
  }
  if (r.pos != bytes.size()) throw DataError("checkpoint has trailing bytes");
  return p;
}

void ModelParams::save(const std::filesystem::path& path) const {
  const auto bytes = serialize();
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write checkpoint " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("short write on checkpoint " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

ModelParams ModelParams::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read checkpoint " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize(bytes);
}

}  // namespace tsnmt
