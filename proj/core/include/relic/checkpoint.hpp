#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace relic {

struct NamedTensor {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<double> values;
};

struct NamedRngState {
  std::string name;
  std::array<std::uint64_t, 4> state{};
};

// Little-endian binary: magic "RLCK" | version u16 | config hash 32 bytes |
// step u64 | tensor directory (name, shape, element offset) | f64 payload |
// rng states. Saved via write-to-temp-then-rename so partial files never
// carry the final name.
struct Checkpoint {
  std::uint16_t version = 1;
  std::array<std::uint8_t, 32> config_hash{};
  std::uint64_t step = 0;
  std::vector<NamedTensor> tensors;
  std::vector<NamedRngState> rng_states;

  const NamedTensor* find(const std::string& name) const;
};

std::array<std::uint8_t, 32> sha256_bytes(const std::string& data);
std::string hex_digest(const std::array<std::uint8_t, 32>& hash);

std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(const std::string& bytes);  // FormatError

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace relic
