#include "relic/augment.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "relic/errors.hpp"

namespace relic {

namespace {

// (0.2989, 0.587, 0.114) renormalized to sum exactly 1 so achromatic
// pixels are fixed points of the luminance projection.
constexpr double kLumSum = 0.2989 + 0.587 + 0.114;
constexpr double kLumR = 0.2989 / kLumSum;
constexpr double kLumG = 0.587 / kLumSum;
constexpr double kLumB = 0.114 / kLumSum;

double clamp01(double v) { return std::min(std::max(v, 0.0), 1.0); }

double luminance(const double* px) {
  return kLumR * px[0] + kLumG * px[1] + kLumB * px[2];
}

void rgb_to_hsv(double r, double g, double b, double& h, double& s,
                double& v) {
  v = std::max(r, std::max(g, b));
  const double mn = std::min(r, std::min(g, b));
  const double d = v - mn;
  s = v <= 0.0 ? 0.0 : d / v;
  if (d <= 0.0) {
    h = 0.0;
    return;
  }
  if (v == r) {
    h = (g - b) / d;
  } else if (v == g) {
    h = (b - r) / d + 2.0;
  } else {
    h = (r - g) / d + 4.0;
  }
  h /= 6.0;
  if (h < 0.0) h += 1.0;
}

void hsv_to_rgb(double h, double s, double v, double& r, double& g,
                double& b) {
  const double hh = h * 6.0;
  const int sector = static_cast<int>(std::floor(hh)) % 6;
  const double f = hh - std::floor(hh);
  const double p = v * (1.0 - s);
  const double q = v * (1.0 - s * f);
  const double t = v * (1.0 - s * (1.0 - f));
  switch (sector) {
    case 0: r = v; g = t; b = p; break;
    case 1: r = q; g = v; b = p; break;
    case 2: r = p; g = v; b = t; break;
    case 3: r = p; g = q; b = v; break;
    case 4: r = t; g = p; b = v; break;
    default: r = v; g = p; b = q; break;
  }
}

// In-place single-image ops on a channel-last buffer of size h*w*c.

void flip_one(double* px, std::size_t h, std::size_t w, std::size_t c) {
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w / 2; ++x) {
      double* a = px + (y * w + x) * c;
      double* b = px + (y * w + (w - 1 - x)) * c;
      for (std::size_t ch = 0; ch < c; ++ch) std::swap(a[ch], b[ch]);
    }
  }
}

void brightness_one(double* px, std::size_t count, double offset) {
  if (offset == 0.0) return;
  for (std::size_t i = 0; i < count; ++i) px[i] = clamp01(px[i] + offset);
}

void contrast_one(double* px, std::size_t h, std::size_t w, std::size_t c,
                  double offset) {
  if (offset == 0.0) return;
  const double factor = 1.0 + offset;
  double mean = 0.0;
  for (std::size_t p = 0; p < h * w; ++p) {
    mean += c == 3 ? luminance(px + p * c) : px[p];
  }
  mean /= static_cast<double>(h * w);
  for (std::size_t i = 0; i < h * w * c; ++i) {
    px[i] = clamp01(mean + factor * (px[i] - mean));
  }
}

void saturation_one(double* px, std::size_t h, std::size_t w, std::size_t c,
                    double offset) {
  if (offset == 0.0 || c != 3) return;
  const double factor = 1.0 + offset;
  for (std::size_t p = 0; p < h * w; ++p) {
    double* pix = px + p * 3;
    const double lum = luminance(pix);
    for (int ch = 0; ch < 3; ++ch) {
      pix[ch] = clamp01(lum + factor * (pix[ch] - lum));
    }
  }
}

void hue_one(double* px, std::size_t h, std::size_t w, std::size_t c,
             double offset) {
  if (offset == 0.0 || c != 3) return;
  for (std::size_t p = 0; p < h * w; ++p) {
    double* pix = px + p * 3;
    double hh, ss, vv;
    rgb_to_hsv(pix[0], pix[1], pix[2], hh, ss, vv);
    hh += offset;
    hh -= std::floor(hh);  // wrap to [0, 1)
    hsv_to_rgb(hh, ss, vv, pix[0], pix[1], pix[2]);
    for (int ch = 0; ch < 3; ++ch) pix[ch] = clamp01(pix[ch]);
  }
}

void grayscale_one(double* px, std::size_t h, std::size_t w, std::size_t c) {
  if (c != 3) return;
  for (std::size_t p = 0; p < h * w; ++p) {
    double* pix = px + p * 3;
    const double lum = luminance(pix);
    pix[0] = pix[1] = pix[2] = lum;
  }
}

void blur_one(double* px, std::size_t h, std::size_t w, std::size_t c,
              const std::vector<double>& kernel) {
  const std::ptrdiff_t r = static_cast<std::ptrdiff_t>(kernel.size() / 2);
  std::vector<double> tmp(h * w * c);
  auto clampi = [](std::ptrdiff_t v, std::ptrdiff_t hi) {
    return std::min(std::max(v, std::ptrdiff_t{0}), hi);
  };
  // Horizontal pass into tmp.
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t ch = 0; ch < c; ++ch) {
        double acc = 0.0;
        for (std::size_t t = 0; t < kernel.size(); ++t) {
          const std::ptrdiff_t sx = clampi(
              static_cast<std::ptrdiff_t>(x) + static_cast<std::ptrdiff_t>(t) - r,
              static_cast<std::ptrdiff_t>(w) - 1);
          acc += kernel[t] * px[(y * w + static_cast<std::size_t>(sx)) * c + ch];
        }
        tmp[(y * w + x) * c + ch] = acc;
      }
    }
  }
  // Vertical pass back into px, clamped to the pixel range.
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t ch = 0; ch < c; ++ch) {
        double acc = 0.0;
        for (std::size_t t = 0; t < kernel.size(); ++t) {
          const std::ptrdiff_t sy = clampi(
              static_cast<std::ptrdiff_t>(y) + static_cast<std::ptrdiff_t>(t) - r,
              static_cast<std::ptrdiff_t>(h) - 1);
          acc += kernel[t] * tmp[(static_cast<std::size_t>(sy) * w + x) * c + ch];
        }
        px[(y * w + x) * c + ch] = clamp01(acc);
      }
    }
  }
}

void solarize_one(double* px, std::size_t count) {
  for (std::size_t i = 0; i < count; ++i) {
    if (!(px[i] >= 0.0 && px[i] <= 1.0)) {
      throw ContractError("solarize: pixel value " + std::to_string(px[i]) +
                          " outside [0, 1]");
    }
    px[i] = px[i] < 0.5 ? px[i] : 1.0 - px[i];
  }
}

void normalize_one(double* px, std::size_t h, std::size_t w, std::size_t c,
                   const std::array<double, 3>& mean,
                   const std::array<double, 3>& stddev) {
  for (std::size_t p = 0; p < h * w; ++p) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      px[p * c + ch] = (px[p * c + ch] - mean[ch]) / stddev[ch];
    }
  }
}

// Bilinear sample of the crop rectangle of image `index` into dst.
void crop_resize_one(const ImageBatch& in, std::size_t index,
                     const CropRect& crop, std::size_t out_h,
                     std::size_t out_w, double* dst) {
  const double scale_y =
      static_cast<double>(crop.h) / static_cast<double>(out_h);
  const double scale_x =
      static_cast<double>(crop.w) / static_cast<double>(out_w);
  const std::ptrdiff_t max_y = static_cast<std::ptrdiff_t>(crop.h) - 1;
  const std::ptrdiff_t max_x = static_cast<std::ptrdiff_t>(crop.w) - 1;
  auto clampi = [](std::ptrdiff_t v, std::ptrdiff_t hi) {
    return std::min(std::max(v, std::ptrdiff_t{0}), hi);
  };
  for (std::size_t dy = 0; dy < out_h; ++dy) {
    // Half-pixel centers: sy = (dy + 0.5) * scale - 0.5 in crop-local coords.
    const double sy = (static_cast<double>(dy) + 0.5) * scale_y - 0.5;
    const std::ptrdiff_t y0 = static_cast<std::ptrdiff_t>(std::floor(sy));
    const double wy = sy - std::floor(sy);
    const std::size_t y0c = static_cast<std::size_t>(clampi(y0, max_y));
    const std::size_t y1c = static_cast<std::size_t>(clampi(y0 + 1, max_y));
    for (std::size_t dx = 0; dx < out_w; ++dx) {
      const double sx = (static_cast<double>(dx) + 0.5) * scale_x - 0.5;
      const std::ptrdiff_t x0 = static_cast<std::ptrdiff_t>(std::floor(sx));
      const double wx = sx - std::floor(sx);
      const std::size_t x0c = static_cast<std::size_t>(clampi(x0, max_x));
      const std::size_t x1c = static_cast<std::size_t>(clampi(x0 + 1, max_x));
      for (std::size_t ch = 0; ch < in.c; ++ch) {
        const double v00 = in.at(index, crop.y + y0c, crop.x + x0c, ch);
        const double v01 = in.at(index, crop.y + y0c, crop.x + x1c, ch);
        const double v10 = in.at(index, crop.y + y1c, crop.x + x0c, ch);
        const double v11 = in.at(index, crop.y + y1c, crop.x + x1c, ch);
        dst[(dy * out_w + dx) * in.c + ch] =
            (1.0 - wy) * ((1.0 - wx) * v00 + wx * v01) +
            wy * ((1.0 - wx) * v10 + wx * v11);
      }
    }
  }
}

void apply_one(const AugmentationSpec& spec, const AugmentationDraw& draw,
               const ImageBatch& in, std::size_t index, double* out) {
  const std::size_t oh = spec.out_h, ow = spec.out_w, c = in.c;
  crop_resize_one(in, index, draw.crop, oh, ow, out);
  if (draw.flip) flip_one(out, oh, ow, c);
  for (std::uint8_t op : draw.jitter_order) {
    switch (op) {
      case 0: brightness_one(out, oh * ow * c, draw.brightness_offset); break;
      case 1: contrast_one(out, oh, ow, c, draw.contrast_offset); break;
      case 2: saturation_one(out, oh, ow, c, draw.saturation_offset); break;
      default: hue_one(out, oh, ow, c, draw.hue_offset); break;
    }
  }
  if (draw.grayscale) grayscale_one(out, oh, ow, c);
  if (draw.blur) {
    blur_one(out, oh, ow, c, gaussian_kernel(spec.blur_kernel, draw.blur_sigma));
  }
  if (draw.solarize) solarize_one(out, oh * ow * c);
  normalize_one(out, oh, ow, c, spec.norm_mean, spec.norm_std);
}

}  // namespace

void AugmentationSpec::validate() const {
  if (!(crop_area_min > 0.0 && crop_area_min <= crop_area_max &&
        crop_area_max <= 1.0)) {
    throw ConfigError("augment: crop area range must lie in (0, 1]");
  }
  if (!(aspect_min > 0.0 && aspect_min <= aspect_max)) {
    throw ConfigError("augment: bad aspect range");
  }
  if (out_h == 0 || out_w == 0) throw ConfigError("augment: empty out size");
  for (double p : {flip_prob, grayscale_prob, blur_prob, solarize_prob}) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw ConfigError("augment: probability outside [0, 1]");
    }
  }
  for (double s : {brightness, contrast, saturation}) {
    if (s < 0.0) throw ConfigError("augment: negative jitter strength");
  }
  if (hue < 0.0 || hue > 0.5) {
    throw ConfigError("augment: hue strength must lie in [0, 0.5]");
  }
  if (blur_kernel == 0 || blur_kernel % 2 == 0) {
    throw ConfigError("augment: blur kernel size must be odd");
  }
  if (!(blur_sigma_min > 0.0 && blur_sigma_min <= blur_sigma_max)) {
    throw ConfigError("augment: bad blur sigma range");
  }
  for (double s : norm_std) {
    if (!(s > 0.0)) throw ConfigError("augment: normalize std must be positive");
  }
}

ImageBatch solarize(const ImageBatch& batch) {
  batch.validate();
  ImageBatch out = batch;
  if (!out.pixels.empty()) solarize_one(out.pixels.data(), out.pixels.size());
  return out;
}

std::vector<double> gaussian_kernel(std::size_t kernel_size, double sigma) {
  if (kernel_size == 0 || kernel_size % 2 == 0) {
    throw ContractError("gaussian kernel size must be odd, got " +
                        std::to_string(kernel_size));
  }
  if (!(sigma > 0.0)) {
    throw ContractError("gaussian sigma must be positive");
  }
  std::vector<double> weights(kernel_size);
  const double center = static_cast<double>(kernel_size - 1) / 2.0;
  double total = 0.0;
  for (std::size_t i = 0; i < kernel_size; ++i) {
    const double d = static_cast<double>(i) - center;
    weights[i] = std::exp(-d * d / (2.0 * sigma * sigma));
    total += weights[i];
  }
  for (double& v : weights) v /= total;
  return weights;
}

ImageBatch gaussian_blur(const ImageBatch& batch, double sigma,
                         std::size_t kernel_size) {
  batch.validate();
  const std::vector<double> kernel = gaussian_kernel(kernel_size, sigma);
  ImageBatch out = batch;
  for (std::size_t i = 0; i < out.n; ++i) {
    blur_one(out.pixels.data() + out.image_offset(i), out.h, out.w, out.c,
             kernel);
  }
  return out;
}

ImageBatch to_grayscale(const ImageBatch& batch) {
  batch.validate();
  ImageBatch out = batch;
  for (std::size_t i = 0; i < out.n; ++i) {
    grayscale_one(out.pixels.data() + out.image_offset(i), out.h, out.w, out.c);
  }
  return out;
}

ImageBatch flip_horizontal(const ImageBatch& batch) {
  batch.validate();
  ImageBatch out = batch;
  for (std::size_t i = 0; i < out.n; ++i) {
    flip_one(out.pixels.data() + out.image_offset(i), out.h, out.w, out.c);
  }
  return out;
}

ImageBatch normalize_channels(const ImageBatch& batch,
                              const std::array<double, 3>& mean,
                              const std::array<double, 3>& stddev) {
  batch.validate();
  for (double s : stddev) {
    if (!(s > 0.0)) throw ContractError("normalize: std must be positive");
  }
  ImageBatch out = batch;
  for (std::size_t i = 0; i < out.n; ++i) {
    normalize_one(out.pixels.data() + out.image_offset(i), out.h, out.w, out.c,
                  mean, stddev);
  }
  return out;
}

CropRect sample_crop(const AugmentationSpec& spec, Rng& rng, std::size_t in_h,
                     std::size_t in_w) {
  if (in_h < 2 || in_w < 2) {
    throw ContractError("sample_crop: image must be at least 2x2");
  }
  const double area = static_cast<double>(in_h * in_w);
  for (int attempt = 0; attempt < 10; ++attempt) {
    const double frac = rng.uniform(spec.crop_area_min, spec.crop_area_max);
    const double target = frac * area;
    const double ratio =
        std::exp(rng.uniform(std::log(spec.aspect_min), std::log(spec.aspect_max)));
    const auto cw = static_cast<std::size_t>(
        std::llround(std::sqrt(target * ratio)));
    const auto ch = static_cast<std::size_t>(
        std::llround(std::sqrt(target / ratio)));
    if (cw >= 1 && cw <= in_w && ch >= 1 && ch <= in_h) {
      CropRect rect;
      rect.h = ch;
      rect.w = cw;
      rect.y = static_cast<std::size_t>(rng.below(in_h - ch + 1));
      rect.x = static_cast<std::size_t>(rng.below(in_w - cw + 1));
      return rect;
    }
  }
  // Fallback: center crop of the largest rectangle with in-range aspect.
  const double in_ratio = static_cast<double>(in_w) / static_cast<double>(in_h);
  std::size_t ch = in_h, cw = in_w;
  if (in_ratio < spec.aspect_min) {
    cw = in_w;
    ch = std::max<std::size_t>(
        1, static_cast<std::size_t>(
               std::llround(static_cast<double>(in_w) / spec.aspect_min)));
  } else if (in_ratio > spec.aspect_max) {
    ch = in_h;
    cw = std::max<std::size_t>(
        1, static_cast<std::size_t>(
               std::llround(static_cast<double>(in_h) * spec.aspect_max)));
  }
  ch = std::min(ch, in_h);
  cw = std::min(cw, in_w);
  CropRect rect;
  rect.h = ch;
  rect.w = cw;
  rect.y = (in_h - ch) / 2;
  rect.x = (in_w - cw) / 2;
  return rect;
}

ImageBatch crop_resize(const ImageBatch& batch,
                       const std::vector<CropRect>& rects, std::size_t out_h,
                       std::size_t out_w) {
  batch.validate();
  if (rects.size() != batch.n) {
    throw ContractError("crop_resize: " + std::to_string(rects.size()) +
                        " rects for " + std::to_string(batch.n) + " images");
  }
  if (out_h == 0 || out_w == 0) {
    throw ContractError("crop_resize: empty output size");
  }
  for (const CropRect& r : rects) {
    if (r.h == 0 || r.w == 0 || r.y + r.h > batch.h || r.x + r.w > batch.w) {
      throw ContractError("crop_resize: rectangle outside image bounds");
    }
  }
  ImageBatch out = ImageBatch::zeros(batch.n, out_h, out_w, batch.c);
  for (std::size_t i = 0; i < batch.n; ++i) {
    crop_resize_one(batch, i, rects[i], out_h, out_w,
                    out.pixels.data() + out.image_offset(i));
  }
  return out;
}

ImageBatch random_resized_crop(const ImageBatch& batch,
                               const AugmentationSpec& spec, Rng& rng,
                               std::vector<CropRect>* rects) {
  batch.validate();
  spec.validate();
  std::vector<CropRect> chosen(batch.n);
  for (std::size_t i = 0; i < batch.n; ++i) {
    chosen[i] = sample_crop(spec, rng, batch.h, batch.w);
  }
  ImageBatch out = crop_resize(batch, chosen, spec.out_h, spec.out_w);
  if (rects) *rects = std::move(chosen);
  return out;
}

AugmentationDraw draw_augmentation(const AugmentationSpec& spec, Rng& rng,
                                   std::size_t in_h, std::size_t in_w) {
  AugmentationDraw draw;
  draw.crop = sample_crop(spec, rng, in_h, in_w);
  draw.flip = rng.bernoulli(spec.flip_prob);
  for (std::size_t i = 3; i > 0; --i) {  // Fisher-Yates over the jitter ops
    const std::size_t j = static_cast<std::size_t>(rng.below(i + 1));
    std::swap(draw.jitter_order[i], draw.jitter_order[j]);
  }
  draw.brightness_offset = rng.uniform(-spec.brightness, spec.brightness);
  draw.contrast_offset = rng.uniform(-spec.contrast, spec.contrast);
  draw.saturation_offset = rng.uniform(-spec.saturation, spec.saturation);
  draw.hue_offset = rng.uniform(-spec.hue, spec.hue);
  draw.grayscale = rng.bernoulli(spec.grayscale_prob);
  draw.blur = rng.bernoulli(spec.blur_prob);
  draw.blur_sigma = rng.uniform(spec.blur_sigma_min, spec.blur_sigma_max);
  draw.solarize = rng.bernoulli(spec.solarize_prob);
  return draw;
}

ImageBatch replay(const ImageBatch& batch, const AugmentationSpec& spec,
                  const std::vector<AugmentationDraw>& draws) {
  batch.validate();
  spec.validate();
  if (draws.size() != batch.n) {
    throw ContractError("replay: " + std::to_string(draws.size()) +
                        " draws for " + std::to_string(batch.n) + " images");
  }
  for (const AugmentationDraw& d : draws) {
    if (d.crop.h == 0 || d.crop.w == 0 || d.crop.y + d.crop.h > batch.h ||
        d.crop.x + d.crop.w > batch.w) {
      throw ContractError("replay: crop rectangle outside image bounds");
    }
  }
  ImageBatch out = ImageBatch::zeros(batch.n, spec.out_h, spec.out_w, batch.c);
  for (std::size_t i = 0; i < batch.n; ++i) {
    apply_one(spec, draws[i], batch, i,
              out.pixels.data() + out.image_offset(i));
  }
  return out;
}

ImageBatch augment(const ImageBatch& batch, const AugmentationSpec& spec,
                   Rng& rng, std::vector<AugmentationDraw>* draws) {
  batch.validate();
  spec.validate();
  std::vector<AugmentationDraw> local(batch.n);
  for (std::size_t i = 0; i < batch.n; ++i) {
    local[i] = draw_augmentation(spec, rng, batch.h, batch.w);
  }
  ImageBatch out = replay(batch, spec, local);
  if (draws) *draws = std::move(local);
  return out;
}

ImageBatch augment_deterministic(const ImageBatch& batch,
                                 const AugmentationSpec& spec, const Rng& base,
                                 std::uint64_t stream_id,
                                 std::size_t n_threads,
                                 std::vector<AugmentationDraw>* draws) {
  batch.validate();
  spec.validate();
  ImageBatch out = ImageBatch::zeros(batch.n, spec.out_h, spec.out_w, batch.c);
  if (draws) draws->assign(batch.n, AugmentationDraw{});

  auto work = [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      Rng rng = base.derive(stream_id, i);
      const AugmentationDraw draw = draw_augmentation(spec, rng, batch.h, batch.w);
      apply_one(spec, draw, batch, i, out.pixels.data() + out.image_offset(i));
      if (draws) (*draws)[i] = draw;
    }
  };

  if (n_threads <= 1 || batch.n <= 1) {
    work(0, batch.n);
    return out;
  }
  const std::size_t workers = std::min(n_threads, batch.n);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  const std::size_t chunk = (batch.n + workers - 1) / workers;
  for (std::size_t t = 0; t < workers; ++t) {
    const std::size_t lo = t * chunk;
    const std::size_t hi = std::min(batch.n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back(work, lo, hi);
  }
  for (std::thread& th : pool) th.join();
  return out;
}

}  // namespace relic
