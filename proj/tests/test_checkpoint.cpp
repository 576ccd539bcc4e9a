#include "relic/checkpoint.hpp"

#include <gtest/gtest.h>

#include <cstdio>
#include <string>

#include "relic/errors.hpp"

namespace relic {
namespace {

std::string temp_path(const std::string& name) {
  return std::string(::testing::TempDir()) + name;
}

Checkpoint sample_checkpoint() {
  Checkpoint ckpt;
  ckpt.config_hash = sha256_bytes("sample config");
  ckpt.step = 123456789;
  ckpt.tensors.push_back({"online.encoder.w0", {2, 3}, {1, -2, 3.5, 0, 1e-12, -7}});
  ckpt.tensors.push_back({"online.encoder.b0", {1, 3}, {0.25, 0.5, 0.75}});
  ckpt.tensors.push_back({"momentum.encoder.w0", {6}, {0, 0, 0, 0, 0, 1}});
  ckpt.rng_states.push_back({"batch", {1, 2, 3, 4}});
  ckpt.rng_states.push_back({"init.encoder", {5, 6, 7, 8}});
  return ckpt;
}

TEST(Checkpoint, RoundTripIsBitExact) {
  const Checkpoint ckpt = sample_checkpoint();
  const std::string bytes = serialize_checkpoint(ckpt);
  const Checkpoint back = deserialize_checkpoint(bytes);

  EXPECT_EQ(back.version, ckpt.version);
  EXPECT_EQ(back.config_hash, ckpt.config_hash);
  EXPECT_EQ(back.step, ckpt.step);
  ASSERT_EQ(back.tensors.size(), ckpt.tensors.size());
  for (std::size_t i = 0; i < ckpt.tensors.size(); ++i) {
    EXPECT_EQ(back.tensors[i].name, ckpt.tensors[i].name);
    EXPECT_EQ(back.tensors[i].shape, ckpt.tensors[i].shape);
    EXPECT_EQ(back.tensors[i].values, ckpt.tensors[i].values);
  }
  ASSERT_EQ(back.rng_states.size(), 2u);
  EXPECT_EQ(back.rng_states[0].name, "batch");
  EXPECT_EQ(back.rng_states[1].state, ckpt.rng_states[1].state);

  // Re-serializing the parsed object reproduces the bytes exactly.
  EXPECT_EQ(serialize_checkpoint(back), bytes);
}

TEST(Checkpoint, FindLocatesTensorsByName) {
  const Checkpoint ckpt = sample_checkpoint();
  ASSERT_NE(ckpt.find("online.encoder.b0"), nullptr);
  EXPECT_EQ(ckpt.find("online.encoder.b0")->values.size(), 3u);
  EXPECT_EQ(ckpt.find("nope"), nullptr);
}

TEST(Checkpoint, Sha256MatchesKnownVectors) {
  EXPECT_EQ(hex_digest(sha256_bytes("abc")),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  EXPECT_EQ(hex_digest(sha256_bytes("")),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST(Checkpoint, BadMagicIsRejectedAtOffsetZero) {
  std::string bytes = serialize_checkpoint(sample_checkpoint());
  bytes[0] = 'X';
  try {
    deserialize_checkpoint(bytes);
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_EQ(e.byte_offset(), 0u);
  }
}

TEST(Checkpoint, UnsupportedVersionIsRejected) {
  std::string bytes = serialize_checkpoint(sample_checkpoint());
  bytes[4] = 9;  // version word lives right after the magic
  try {
    deserialize_checkpoint(bytes);
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_EQ(e.byte_offset(), 4u);
  }
}

TEST(Checkpoint, TruncationIsRejectedWithOffset) {
  const std::string bytes = serialize_checkpoint(sample_checkpoint());
  for (const std::size_t keep :
       {std::size_t{3}, std::size_t{20}, std::size_t{60}, bytes.size() - 1}) {
    try {
      deserialize_checkpoint(bytes.substr(0, keep));
      FAIL() << "expected FormatError at keep=" << keep;
    } catch (const FormatError& e) {
      EXPECT_LE(e.byte_offset(), keep);
    }
  }
}

TEST(Checkpoint, TrailingBytesAreRejected) {
  std::string bytes = serialize_checkpoint(sample_checkpoint());
  bytes.push_back('\0');
  EXPECT_THROW(deserialize_checkpoint(bytes), FormatError);
}

TEST(Checkpoint, NonContiguousOffsetIsRejected) {
  Checkpoint ckpt;
  ckpt.step = 1;
  ckpt.tensors.push_back({"t", {2}, {1.0, 2.0}});
  std::string bytes = serialize_checkpoint(ckpt);
  // Directory entry layout after the 50-byte header for a 1-char name:
  // name len u16, name, rank u32, one dim u64, element offset u64.
  const std::size_t offset_pos = 50 + 2 + 1 + 4 + 8;
  ASSERT_EQ(bytes[offset_pos], 0);
  bytes[offset_pos] = 1;
  try {
    deserialize_checkpoint(bytes);
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("non-contiguous"), std::string::npos);
  }
}

TEST(Checkpoint, ShapeValueMismatchIsRejectedOnWrite) {
  Checkpoint ckpt;
  ckpt.tensors.push_back({"t", {2, 2}, {1.0, 2.0}});
  EXPECT_THROW(serialize_checkpoint(ckpt), ContractError);
}

TEST(Checkpoint, SaveAndLoadThroughFile) {
  const Checkpoint ckpt = sample_checkpoint();
  const std::string path = temp_path("ckpt_roundtrip.rlck");
  save_checkpoint(ckpt, path);
  const Checkpoint back = load_checkpoint(path);
  EXPECT_EQ(serialize_checkpoint(back), serialize_checkpoint(ckpt));
  std::remove(path.c_str());

  EXPECT_THROW(load_checkpoint(temp_path("missing.rlck")), FormatError);
}

}  // namespace
}  // namespace relic
