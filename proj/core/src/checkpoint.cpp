#include "relic/checkpoint.hpp"

#include <openssl/evp.h>

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "relic/errors.hpp"

namespace relic {
namespace {

constexpr char kMagic[4] = {'R', 'L', 'C', 'K'};
constexpr std::uint16_t kVersion = 1;
constexpr std::size_t kMaxRank = 8;

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof bits);
  put_u64(out, bits);
}

class ByteReader {
 public:
  explicit ByteReader(const std::string& bytes) : bytes_(bytes) {}

  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

  void need(std::size_t n, const char* what) const {
    if (remaining() < n) {
      throw FormatError(std::string("checkpoint: truncated reading ") + what,
                        pos_);
    }
  }

  std::uint16_t u16(const char* what) {
    need(2, what);
    const auto* p = reinterpret_cast<const unsigned char*>(bytes_.data() + pos_);
    pos_ += 2;
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
  }

  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    const auto* p = reinterpret_cast<const unsigned char*>(bytes_.data() + pos_);
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
    pos_ += 4;
    return v;
  }

  std::uint64_t u64(const char* what) {
    need(8, what);
    std::uint64_t v = 0;
    const auto* p = reinterpret_cast<const unsigned char*>(bytes_.data() + pos_);
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    pos_ += 8;
    return v;
  }

  double f64(const char* what) {
    const std::uint64_t bits = u64(what);
    double v;
    std::memcpy(&v, &bits, sizeof v);
    return v;
  }

  std::string raw(std::size_t n, const char* what) {
    need(n, what);
    std::string out = bytes_.substr(pos_, n);
    pos_ += n;
    return out;
  }

 private:
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

std::string read_name(ByteReader& reader, const char* what) {
  const std::uint16_t len = reader.u16(what);
  return reader.raw(len, what);
}

}  // namespace

const NamedTensor* Checkpoint::find(const std::string& name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

std::array<std::uint8_t, 32> sha256_bytes(const std::string& data) {
  std::array<std::uint8_t, 32> out{};
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), out.data(), &len, EVP_sha256(),
                 nullptr) != 1 ||
      len != out.size()) {
    throw StateError("sha256 digest failed");
  }
  return out;
}

std::string hex_digest(const std::array<std::uint8_t, 32>& hash) {
  static const char* digits = "0123456789abcdef";
  std::string out;
  out.reserve(64);
  for (const auto byte : hash) {
    out.push_back(digits[byte >> 4]);
    out.push_back(digits[byte & 0xf]);
  }
  return out;
}

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  std::string out;
  out.append(kMagic, sizeof kMagic);
  put_u16(out, ckpt.version);
  out.append(reinterpret_cast<const char*>(ckpt.config_hash.data()),
             ckpt.config_hash.size());
  put_u64(out, ckpt.step);

  put_u32(out, static_cast<std::uint32_t>(ckpt.tensors.size()));
  std::uint64_t offset = 0;
  for (const auto& tensor : ckpt.tensors) {
    std::size_t numel = 1;
    for (const auto d : tensor.shape) numel *= d;
    if (numel != tensor.values.size()) {
      throw ContractError("checkpoint: shape/value mismatch for " +
                          tensor.name);
    }
    put_u16(out, static_cast<std::uint16_t>(tensor.name.size()));
    out.append(tensor.name);
    put_u32(out, static_cast<std::uint32_t>(tensor.shape.size()));
    for (const auto d : tensor.shape) put_u64(out, d);
    put_u64(out, offset);
    offset += numel;
  }

  put_u64(out, offset);
  for (const auto& tensor : ckpt.tensors) {
    for (const auto v : tensor.values) put_f64(out, v);
  }

  put_u32(out, static_cast<std::uint32_t>(ckpt.rng_states.size()));
  for (const auto& rng : ckpt.rng_states) {
    put_u16(out, static_cast<std::uint16_t>(rng.name.size()));
    out.append(rng.name);
    for (const auto word : rng.state) put_u64(out, word);
  }
  return out;
}

Checkpoint deserialize_checkpoint(const std::string& bytes) {
  ByteReader reader(bytes);
  const std::string magic = reader.raw(4, "magic");
  if (std::memcmp(magic.data(), kMagic, sizeof kMagic) != 0) {
    throw FormatError("checkpoint: bad magic, expected \"RLCK\"", 0);
  }
  Checkpoint ckpt;
  ckpt.version = reader.u16("version");
  if (ckpt.version != kVersion) {
    throw FormatError("checkpoint: unsupported version " +
                          std::to_string(ckpt.version),
                      4);
  }
  const std::string hash = reader.raw(32, "config hash");
  std::memcpy(ckpt.config_hash.data(), hash.data(), 32);
  ckpt.step = reader.u64("step");

  const std::uint32_t n_tensors = reader.u32("tensor count");
  std::vector<std::uint64_t> offsets;
  std::uint64_t expected_offset = 0;
  for (std::uint32_t i = 0; i < n_tensors; ++i) {
    NamedTensor tensor;
    tensor.name = read_name(reader, "tensor name");
    const std::size_t dir_pos = reader.pos();
    const std::uint32_t rank = reader.u32("tensor rank");
    if (rank > kMaxRank) {
      throw FormatError("checkpoint: implausible rank for " + tensor.name,
                        dir_pos);
    }
    unsigned __int128 numel = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      const std::uint64_t dim = reader.u64("tensor dim");
      tensor.shape.push_back(static_cast<std::size_t>(dim));
      numel *= dim;
    }
    if (numel > (std::uint64_t{1} << 40)) {
      throw FormatError("checkpoint: implausible size for " + tensor.name,
                        dir_pos);
    }
    const std::uint64_t offset = reader.u64("tensor offset");
    if (offset != expected_offset) {
      throw FormatError("checkpoint: non-contiguous offset for " + tensor.name,
                        dir_pos);
    }
    expected_offset += static_cast<std::uint64_t>(numel);
    if (expected_offset > (std::uint64_t{1} << 40)) {
      throw FormatError("checkpoint: implausible payload size", dir_pos);
    }
    offsets.push_back(offset);
    ckpt.tensors.push_back(std::move(tensor));
  }

  const std::size_t payload_pos = reader.pos();
  const std::uint64_t payload_count = reader.u64("payload count");
  if (payload_count != expected_offset) {
    throw FormatError("checkpoint: payload count disagrees with directory",
                      payload_pos);
  }
  reader.need(payload_count * 8, "payload");
  for (auto& tensor : ckpt.tensors) {
    std::size_t numel = 1;
    for (const auto d : tensor.shape) numel *= d;
    tensor.values.resize(numel);
    for (auto& v : tensor.values) v = reader.f64("payload");
  }

  const std::uint32_t n_rng = reader.u32("rng count");
  for (std::uint32_t i = 0; i < n_rng; ++i) {
    NamedRngState rng;
    rng.name = read_name(reader, "rng name");
    for (auto& word : rng.state) word = reader.u64("rng state");
    ckpt.rng_states.push_back(std::move(rng));
  }

  if (reader.remaining() != 0) {
    throw FormatError("checkpoint: trailing bytes", reader.pos());
  }
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  const std::string bytes = serialize_checkpoint(ckpt);
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("checkpoint: cannot write " + tmp);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw FormatError("checkpoint: write failed for " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    throw FormatError("checkpoint: cannot rename " + tmp + " to " + path);
  }
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("checkpoint: cannot open " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return deserialize_checkpoint(buffer.str());
}

}  // namespace relic
