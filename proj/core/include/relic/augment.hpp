#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "relic/image.hpp"
#include "relic/rng.hpp"

namespace relic {

// Augmentation pipeline configuration. Ops run in a fixed order: crop,
// flip, jitter, grayscale, blur, solarize, normalize. Strengths of exactly
// zero make the corresponding jitter a structural no-op.
struct AugmentationSpec {
  double crop_area_min = 0.08;  // fraction of source area
  double crop_area_max = 1.0;
  double aspect_min = 3.0 / 4.0;  // sampled in log space
  double aspect_max = 4.0 / 3.0;
  std::size_t out_h = 16;
  std::size_t out_w = 16;
  double flip_prob = 0.5;
  double brightness = 0.4;  // jitter offsets drawn uniform in [-strength, strength]
  double contrast = 0.4;
  double saturation = 0.4;
  double hue = 0.1;  // at most 0.5: hue offsets wrap around the circle
  double grayscale_prob = 0.2;
  std::size_t blur_kernel = 3;  // odd; 3 suits desk-scale images
  double blur_sigma_min = 0.1;
  double blur_sigma_max = 2.0;
  double blur_prob = 0.5;
  double solarize_prob = 0.2;
  std::array<double, 3> norm_mean = {0.0, 0.0, 0.0};
  std::array<double, 3> norm_std = {1.0, 1.0, 1.0};

  void validate() const;  // throws ConfigError
};

struct CropRect {
  std::size_t y = 0;
  std::size_t x = 0;
  std::size_t h = 0;
  std::size_t w = 0;
};

// Every random choice of one pipeline application on one image. Replaying
// a draw on the same image reproduces the output bit-exactly.
struct AugmentationDraw {
  CropRect crop;
  bool flip = false;
  // Permutation over {0 brightness, 1 contrast, 2 saturation, 3 hue}.
  std::array<std::uint8_t, 4> jitter_order = {0, 1, 2, 3};
  double brightness_offset = 0.0;
  double contrast_offset = 0.0;
  double saturation_offset = 0.0;
  double hue_offset = 0.0;
  bool grayscale = false;
  bool blur = false;
  double blur_sigma = 1.0;
  bool solarize = false;
};

// x -> x for x < 0.5, 1 - x otherwise, elementwise. Pixels must be in [0,1].
ImageBatch solarize(const ImageBatch& batch);

// Truncated discrete Gaussian, renormalized to sum exactly 1.
std::vector<double> gaussian_kernel(std::size_t kernel_size, double sigma);

// Separable convolution with clamp-to-edge borders; output clamped to [0,1]
// so floating-point rounding cannot leak outside the pixel range.
ImageBatch gaussian_blur(const ImageBatch& batch, double sigma,
                         std::size_t kernel_size);

// Luminance projection with weights (0.2989, 0.587, 0.114) renormalized to
// sum 1, replicated across the 3 channels; identity on single-channel input.
ImageBatch to_grayscale(const ImageBatch& batch);

ImageBatch flip_horizontal(const ImageBatch& batch);

// (x - mean[ch]) / std[ch]; single-channel batches use index 0.
ImageBatch normalize_channels(const ImageBatch& batch,
                              const std::array<double, 3>& mean,
                              const std::array<double, 3>& stddev);

// Samples a crop: area fraction uniform in the configured range, aspect
// ratio log-uniform; after 10 non-fitting attempts falls back to the center
// crop of the largest rectangle whose aspect lies inside the range.
CropRect sample_crop(const AugmentationSpec& spec, Rng& rng, std::size_t in_h,
                     std::size_t in_w);

// Bilinear resize (half-pixel centers) of the given rectangle of each image.
ImageBatch crop_resize(const ImageBatch& batch,
                       const std::vector<CropRect>& rects, std::size_t out_h,
                       std::size_t out_w);

ImageBatch random_resized_crop(const ImageBatch& batch,
                               const AugmentationSpec& spec, Rng& rng,
                               std::vector<CropRect>* rects = nullptr);

// Resolves every random choice for one image. Consumption order is fixed:
// crop attempts, flip, jitter order, the four jitter offsets, grayscale,
// blur toggle and sigma, solarize; all fields are drawn unconditionally so
// toggles do not change the downstream stream position.
AugmentationDraw draw_augmentation(const AugmentationSpec& spec, Rng& rng,
                                   std::size_t in_h, std::size_t in_w);

// Applies recorded draws (one per image); pure function of (batch, draws).
ImageBatch replay(const ImageBatch& batch, const AugmentationSpec& spec,
                  const std::vector<AugmentationDraw>& draws);

// Draws fresh choices from rng for each image in order, optionally
// returning them for replay.
ImageBatch augment(const ImageBatch& batch, const AugmentationSpec& spec,
                   Rng& rng, std::vector<AugmentationDraw>* draws = nullptr);

// Schedule-independent parallel variant: image i always uses the stream
// derived from (base, stream_id, i), so the result does not depend on the
// thread count.
ImageBatch augment_deterministic(const ImageBatch& batch,
                                 const AugmentationSpec& spec, const Rng& base,
                                 std::uint64_t stream_id,
                                 std::size_t n_threads = 1,
                                 std::vector<AugmentationDraw>* draws = nullptr);

}  // namespace relic
