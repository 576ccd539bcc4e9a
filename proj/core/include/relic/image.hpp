#pragma once

#include <cstddef>
#include <vector>

#include "relic/tensor.hpp"

namespace relic {

// A batch of n images stored channel-last ([n][h][w][c]) with pixel values
// in [0,1] until normalization. Channels are 1 (grayscale) or 3 (rgb).
struct ImageBatch {
  std::size_t n = 0;
  std::size_t h = 0;
  std::size_t w = 0;
  std::size_t c = 0;
  std::vector<double> pixels;

  static ImageBatch zeros(std::size_t n, std::size_t h, std::size_t w,
                          std::size_t c);

  std::size_t pixels_per_image() const { return h * w * c; }
  std::size_t image_offset(std::size_t i) const { return i * h * w * c; }

  double at(std::size_t i, std::size_t y, std::size_t x, std::size_t ch) const {
    return pixels[((i * h + y) * w + x) * c + ch];
  }
  double& at(std::size_t i, std::size_t y, std::size_t x, std::size_t ch) {
    return pixels[((i * h + y) * w + x) * c + ch];
  }

  void validate() const;          // structure; throws ContractError
  bool in_unit_range() const;     // every pixel in [0,1]
};

// Flattens to an {n, h*w*c} tensor for the encoder.
Tensor flatten(const ImageBatch& batch);

}  // namespace relic
