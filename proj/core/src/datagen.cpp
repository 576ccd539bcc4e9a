#include "relic/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>

#include "relic/errors.hpp"
#include "relic/rng.hpp"

namespace relic {

namespace {

constexpr char kMagic[4] = {'R', 'L', 'D', 'S'};
constexpr std::uint16_t kVersion = 1;
constexpr std::size_t kMaxTemplates = 6;

double clamp01(double v) { return std::min(std::max(v, 0.0), 1.0); }

// Round through f32 so in-memory pixels match their on-disk representation.
double quantize(double v) { return static_cast<double>(static_cast<float>(v)); }

// Pattern templates, all invariant under horizontal flips so augmentation
// cannot alias two content classes onto each other:
// 0 horizontal stripes, 1 vertical stripes, 2 checkerboard (coarse period),
// 3/4 fine-period horizontal/vertical stripes, 5 flat background.
bool foreground_mask(std::size_t content, std::size_t y, std::size_t x,
                     std::size_t h, std::size_t w) {
  const std::size_t coarse = std::max<std::size_t>(2, std::min(h, w) / 4);
  const std::size_t fine = std::max<std::size_t>(1, coarse / 2);
  switch (content) {
    case 0: return (y / coarse) % 2 == 0;
    case 1: return (x / coarse) % 2 == 0;
    case 2: return ((y / coarse) + (x / coarse)) % 2 == 0;
    case 3: return (y / fine) % 2 == 0;
    case 4: return (x / fine) % 2 == 0;
    default: return false;
  }
}

// Style: background intensity rises with the style index and one channel is
// tinted. Foreground keeps a fixed 0.35 contrast over the background so the
// pattern stays visible for every style.
void style_params(std::size_t style, std::size_t n_style, double& background,
                  std::array<double, 3>& tint) {
  const double frac =
      n_style > 1 ? static_cast<double>(style) /
                        static_cast<double>(n_style - 1)
                  : 0.5;
  background = 0.1 + 0.5 * frac;
  tint = {1.0, 1.0, 1.0};
  tint[style % 3] = 0.75;
}

void render_into(const ContentStyleConfig& cfg, std::size_t content,
                 std::size_t style, double* px) {
  double background;
  std::array<double, 3> tint;
  style_params(style, cfg.n_style, background, tint);
  const double foreground = background + 0.35;
  for (std::size_t y = 0; y < cfg.h; ++y) {
    for (std::size_t x = 0; x < cfg.w; ++x) {
      const bool fg = foreground_mask(content, y, x, cfg.h, cfg.w);
      const double base = fg ? foreground : background;
      for (std::size_t ch = 0; ch < cfg.c; ++ch) {
        const double scale = cfg.c == 3 ? tint[ch] : 1.0;
        px[(y * cfg.w + x) * cfg.c + ch] = quantize(clamp01(base * scale));
      }
    }
  }
}

std::size_t poisson_knuth(Rng& rng, double lambda) {
  if (lambda <= 0.0) return 0;
  const double limit = std::exp(-lambda);
  std::size_t k = 0;
  double p = 1.0;
  do {
    ++k;
    p *= rng.uniform();
  } while (p > limit);
  return k - 1;
}

// Little-endian fixed-width helpers. The writer builds the whole payload in
// memory; datasets are desk-scale by design.

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) {
    out.push_back(static_cast<char>((v >> (8 * b)) & 0xff));
  }
}

void put_f32(std::string& out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(out, bits);
}

class ByteReader {
 public:
  ByteReader(std::vector<unsigned char> data, std::string path)
      : data_(std::move(data)), path_(std::move(path)) {}

  std::size_t offset() const { return offset_; }
  std::size_t remaining() const { return data_.size() - offset_; }

  void need(std::size_t n, const char* what) {
    if (remaining() < n) {
      throw FormatError("dataset " + path_ + ": truncated while reading " +
                            what,
                        offset_);
    }
  }

  std::uint16_t u16(const char* what) {
    need(2, what);
    const std::uint16_t v = static_cast<std::uint16_t>(
        data_[offset_] | (data_[offset_ + 1] << 8));
    offset_ += 2;
    return v;
  }

  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int b = 3; b >= 0; --b) {
      v = (v << 8) | data_[offset_ + static_cast<std::size_t>(b)];
    }
    offset_ += 4;
    return v;
  }

  float f32(const char* what) {
    const std::uint32_t bits = u32(what);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }

  void raw(void* dst, std::size_t n, const char* what) {
    need(n, what);
    std::memcpy(dst, data_.data() + offset_, n);
    offset_ += n;
  }

  const std::string& path() const { return path_; }

 private:
  std::vector<unsigned char> data_;
  std::string path_;
  std::size_t offset_ = 0;
};

}  // namespace

void ContentStyleConfig::validate() const {
  if (n_content < 2) throw ConfigError("datagen: need at least 2 content classes");
  if (n_content > kMaxTemplates) {
    throw ConfigError("datagen: render rule supports at most " +
                      std::to_string(kMaxTemplates) + " content classes");
  }
  if (n_style < 1) throw ConfigError("datagen: need at least 1 style");
  if (h < 8 || w < 8) throw ConfigError("datagen: image extents must be >= 8");
  if (c != 1 && c != 3) throw ConfigError("datagen: channels must be 1 or 3");
  if (samples_per_content == 0) throw ConfigError("datagen: empty dataset");
  if (render_rule != 0) throw ConfigError("datagen: unknown render rule");
  if (noise_std < 0.0) throw ConfigError("datagen: negative noise std");
  if (n_content > 65535 || n_style > 65535) {
    throw ConfigError("datagen: labels must fit in u16");
  }
}

void LabeledDataset::validate() const {
  images.validate();
  if (content_labels.size() != images.n || style_labels.size() != images.n) {
    throw ContractError("dataset: label arrays do not match image count");
  }
}

ImageBatch render_template(const ContentStyleConfig& cfg, std::size_t content,
                           std::size_t style) {
  cfg.validate();
  if (content >= cfg.n_content || style >= cfg.n_style) {
    throw ContractError("render_template: label out of range");
  }
  ImageBatch out = ImageBatch::zeros(1, cfg.h, cfg.w, cfg.c);
  render_into(cfg, content, style, out.pixels.data());
  return out;
}

LabeledDataset generate_content_style(const ContentStyleConfig& cfg,
                                      std::uint64_t seed) {
  cfg.validate();
  const std::size_t n = cfg.n_content * cfg.samples_per_content;
  LabeledDataset ds;
  ds.images = ImageBatch::zeros(n, cfg.h, cfg.w, cfg.c);
  ds.content_labels.resize(n);
  ds.style_labels.resize(n);

  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    const auto content = static_cast<std::size_t>(rng.below(cfg.n_content));
    const auto style = static_cast<std::size_t>(rng.below(cfg.n_style));
    ds.content_labels[i] = static_cast<std::uint16_t>(content);
    ds.style_labels[i] = static_cast<std::uint16_t>(style);
    double* px = ds.images.pixels.data() + ds.images.image_offset(i);
    render_into(cfg, content, style, px);
    if (cfg.noise_std > 0.0) {
      for (std::size_t p = 0; p < cfg.h * cfg.w * cfg.c; ++p) {
        px[p] = quantize(clamp01(px[p] + rng.normal(0.0, cfg.noise_std)));
      }
    }
  }
  return ds;
}

CorruptionKind corruption_kind_from_string(const std::string& name) {
  if (name == "gaussian_noise") return CorruptionKind::gaussian_noise;
  if (name == "shot_noise") return CorruptionKind::shot_noise;
  if (name == "impulse_noise") return CorruptionKind::impulse_noise;
  throw ConfigError("unknown corruption kind \"" + name + "\"");
}

std::string to_string(CorruptionKind kind) {
  switch (kind) {
    case CorruptionKind::gaussian_noise: return "gaussian_noise";
    case CorruptionKind::shot_noise: return "shot_noise";
    case CorruptionKind::impulse_noise: return "impulse_noise";
  }
  return "gaussian_noise";
}

ImageBatch corrupt(const ImageBatch& batch, CorruptionKind kind, int severity,
                   std::uint64_t seed, const CorruptionGrids& grids) {
  batch.validate();
  if (severity < 1 || severity > 5) {
    throw ContractError("corrupt: severity must lie in 1..5, got " +
                        std::to_string(severity));
  }
  const std::size_t level = static_cast<std::size_t>(severity - 1);
  Rng rng(seed);
  ImageBatch out = batch;
  switch (kind) {
    case CorruptionKind::gaussian_noise: {
      const double std_dev = grids.gaussian_std[level];
      for (double& v : out.pixels) {
        v = quantize(clamp01(v + rng.normal(0.0, std_dev)));
      }
      break;
    }
    case CorruptionKind::shot_noise: {
      const double lambda = grids.shot_lambda[level];
      for (double& v : out.pixels) {
        const double counts =
            static_cast<double>(poisson_knuth(rng, v * lambda));
        v = quantize(clamp01(counts / lambda));
      }
      break;
    }
    case CorruptionKind::impulse_noise: {
      const double rate = grids.impulse_rate[level];
      for (double& v : out.pixels) {
        if (rng.bernoulli(rate)) v = rng.bernoulli(0.5) ? 1.0 : 0.0;
      }
      break;
    }
  }
  return out;
}

void serialize_dataset(const LabeledDataset& ds, const std::string& path) {
  ds.validate();
  std::string payload;
  payload.reserve(22 + 4 * ds.images.n + 4 * ds.images.pixels.size());
  payload.append(kMagic, 4);
  put_u16(payload, kVersion);
  put_u32(payload, static_cast<std::uint32_t>(ds.images.n));
  put_u32(payload, static_cast<std::uint32_t>(ds.images.h));
  put_u32(payload, static_cast<std::uint32_t>(ds.images.w));
  put_u32(payload, static_cast<std::uint32_t>(ds.images.c));
  for (std::uint16_t label : ds.content_labels) put_u16(payload, label);
  for (std::uint16_t label : ds.style_labels) put_u16(payload, label);
  for (double v : ds.images.pixels) put_f32(payload, static_cast<float>(v));

  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("dataset: cannot open " + tmp + " for writing");
    out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    if (!out) throw FormatError("dataset: write failed for " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    std::remove(tmp.c_str());
    throw FormatError("dataset: cannot move " + tmp + " into place");
  }
}

LabeledDataset deserialize_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("dataset: cannot open " + path);
  std::vector<unsigned char> bytes{std::istreambuf_iterator<char>(in),
                                   std::istreambuf_iterator<char>()};
  ByteReader reader(std::move(bytes), path);

  char magic[4];
  reader.raw(magic, 4, "magic");
  if (std::memcmp(magic, kMagic, 4) != 0) {
    throw FormatError("dataset " + path + ": bad magic, expected \"RLDS\"", 0);
  }
  const std::uint16_t version = reader.u16("version");
  if (version != kVersion) {
    throw FormatError("dataset " + path + ": unsupported version " +
                          std::to_string(version),
                      4);
  }
  const std::uint32_t n = reader.u32("image count");
  const std::uint32_t h = reader.u32("height");
  const std::uint32_t w = reader.u32("width");
  const std::uint32_t c = reader.u32("channels");
  if (c != 1 && c != 3) {
    throw FormatError("dataset " + path + ": channels must be 1 or 3, got " +
                          std::to_string(c),
                      18);
  }
  if (h == 0 || w == 0) {
    throw FormatError("dataset " + path + ": empty image extents", 10);
  }
  const unsigned __int128 wide_count =
      static_cast<unsigned __int128>(n) * h * w * c;
  if (wide_count > reader.remaining()) {  // cheap sanity bound before resize
    throw FormatError("dataset " + path + ": truncated while reading pixels",
                      reader.offset());
  }

  LabeledDataset ds;
  ds.images.n = n;
  ds.images.h = h;
  ds.images.w = w;
  ds.images.c = c;
  ds.content_labels.resize(n);
  ds.style_labels.resize(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    ds.content_labels[i] = reader.u16("content labels");
  }
  for (std::uint32_t i = 0; i < n; ++i) {
    ds.style_labels[i] = reader.u16("style labels");
  }
  const std::size_t count = static_cast<std::size_t>(n) * h * w * c;
  ds.images.pixels.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    ds.images.pixels[i] = static_cast<double>(reader.f32("pixels"));
  }
  if (reader.remaining() != 0) {
    throw FormatError("dataset " + path + ": " +
                          std::to_string(reader.remaining()) +
                          " trailing bytes after pixel payload",
                      reader.offset());
  }
  ds.validate();
  return ds;
}

}  // namespace relic
