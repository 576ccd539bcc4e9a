#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "relic/image.hpp"

namespace relic {

// Synthetic content/style benchmark: content picks a pattern template
// (stripe orientation / frequency, checkerboard, flat), style picks
// background intensity and a global channel tint. Content and style are
// sampled independently by construction.
struct ContentStyleConfig {
  std::size_t n_content = 4;  // at most 6 pattern templates
  std::size_t n_style = 4;
  std::size_t h = 16;
  std::size_t w = 16;
  std::size_t c = 3;
  std::size_t samples_per_content = 250;  // dataset size = n_content * this
  std::size_t render_rule = 0;
  double noise_std = 0.05;

  void validate() const;  // throws ConfigError
};

struct LabeledDataset {
  ImageBatch images;
  std::vector<std::uint16_t> content_labels;
  std::vector<std::uint16_t> style_labels;
  std::string split = "train";

  void validate() const;  // throws ContractError
};

// Pure function of (cfg, seed). Pixels are quantized to f32 precision so a
// serialize/deserialize round trip is bit-exact.
LabeledDataset generate_content_style(const ContentStyleConfig& cfg,
                                      std::uint64_t seed);

// Noise-free template for one (content, style) pair; useful for inspecting
// what the generator considers signal.
ImageBatch render_template(const ContentStyleConfig& cfg, std::size_t content,
                           std::size_t style);

enum class CorruptionKind { gaussian_noise, shot_noise, impulse_noise };

CorruptionKind corruption_kind_from_string(const std::string& name);
std::string to_string(CorruptionKind kind);

// Severity grids: strictly increasing distortion from 1 to 5. Values are
// configuration, not literature constants.
struct CorruptionGrids {
  std::array<double, 5> gaussian_std = {0.03, 0.06, 0.10, 0.15, 0.22};
  std::array<double, 5> shot_lambda = {60.0, 35.0, 20.0, 10.0, 5.0};
  std::array<double, 5> impulse_rate = {0.02, 0.05, 0.09, 0.14, 0.20};
};

// Seeded, clamped to [0,1], f32-quantized; severity must lie in 1..5.
ImageBatch corrupt(const ImageBatch& batch, CorruptionKind kind, int severity,
                   std::uint64_t seed, const CorruptionGrids& grids = {});

// Dataset file: magic "RLDS" | version u16 | n,h,w,c u32 | content u16[n] |
// style u16[n] | pixels f32[n*h*w*c], little-endian. Writes go through a
// temp file and rename so readers never observe partial datasets.
void serialize_dataset(const LabeledDataset& ds, const std::string& path);
LabeledDataset deserialize_dataset(const std::string& path);

}  // namespace relic
