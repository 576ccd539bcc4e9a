#include "relic/image.hpp"

#include "relic/errors.hpp"

namespace relic {

ImageBatch ImageBatch::zeros(std::size_t n, std::size_t h, std::size_t w,
                             std::size_t c) {
  ImageBatch batch;
  batch.n = n;
  batch.h = h;
  batch.w = w;
  batch.c = c;
  batch.pixels.assign(n * h * w * c, 0.0);
  batch.validate();
  return batch;
}

void ImageBatch::validate() const {
  if (h == 0 || w == 0) throw ContractError("image batch: empty extent");
  if (c != 1 && c != 3) {
    throw ContractError("image batch: channels must be 1 or 3, got " +
                        std::to_string(c));
  }
  if (pixels.size() != n * h * w * c) {
    throw ContractError("image batch: pixel buffer holds " +
                        std::to_string(pixels.size()) + " values, expected " +
                        std::to_string(n * h * w * c));
  }
}

bool ImageBatch::in_unit_range() const {
  for (double v : pixels) {
    if (!(v >= 0.0 && v <= 1.0)) return false;
  }
  return true;
}

Tensor flatten(const ImageBatch& batch) {
  batch.validate();
  return Tensor::from(batch.pixels, {batch.n, batch.pixels_per_image()});
}

}  // namespace relic
