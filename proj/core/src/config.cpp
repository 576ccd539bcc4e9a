#include "relic/config.hpp"

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "relic/errors.hpp"

namespace relic {
namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

[[noreturn]] void bad_key(const std::string& key, const std::string& why) {
  throw ConfigError("config: invalid value for " + key + " (" + why + ")");
}

double parse_double_value(const std::string& value, const std::string& key) {
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(value.c_str(), &end);
  if (end == value.c_str() || *end != '\0' || errno == ERANGE) {
    bad_key(key, "expected a number, got \"" + value + "\"");
  }
  return v;
}

std::uint64_t parse_u64_value(const std::string& value,
                              const std::string& key) {
  errno = 0;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(value.c_str(), &end, 10);
  if (end == value.c_str() || *end != '\0' || errno == ERANGE ||
      value.find('-') != std::string::npos) {
    bad_key(key, "expected a nonnegative integer, got \"" + value + "\"");
  }
  return static_cast<std::uint64_t>(v);
}

bool parse_bool_value(const std::string& value, const std::string& key) {
  if (value == "true") return true;
  if (value == "false") return false;
  bad_key(key, "expected true or false, got \"" + value + "\"");
}

std::vector<double> parse_double_list(const std::string& value,
                                      const std::string& key) {
  std::istringstream stream(value);
  std::vector<double> out;
  std::string token;
  while (stream >> token) out.push_back(parse_double_value(token, key));
  if (out.empty()) bad_key(key, "expected at least one number");
  return out;
}

std::vector<std::size_t> parse_size_list(const std::string& value,
                                         const std::string& key) {
  std::istringstream stream(value);
  std::vector<std::size_t> out;
  std::string token;
  while (stream >> token) {
    out.push_back(static_cast<std::size_t>(parse_u64_value(token, key)));
  }
  if (out.empty()) bad_key(key, "expected at least one integer");
  return out;
}

std::string format_size_list(const std::vector<std::size_t>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ' ';
    out += std::to_string(values[i]);
  }
  return out;
}

std::string format_double_list(const std::vector<double>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ' ';
    out += format_double(values[i]);
  }
  return out;
}

template <std::size_t N>
std::string format_double_array(const std::array<double, N>& values) {
  std::vector<double> v(values.begin(), values.end());
  return format_double_list(v);
}

template <std::size_t N>
std::array<double, N> parse_double_array(const std::string& value,
                                         const std::string& key) {
  const auto list = parse_double_list(value, key);
  if (list.size() != N) {
    bad_key(key, "expected exactly " + std::to_string(N) + " numbers");
  }
  std::array<double, N> out{};
  for (std::size_t i = 0; i < N; ++i) out[i] = list[i];
  return out;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

const std::string* ConfigFile::find(const std::string& section,
                                    const std::string& key) const {
  for (const auto& sec : sections) {
    if (sec.name != section) continue;
    for (const auto& [k, v] : sec.entries) {
      if (k == key) return &v;
    }
  }
  return nullptr;
}

void ConfigFile::set(const std::string& section, const std::string& key,
                     std::string value) {
  for (auto& sec : sections) {
    if (sec.name != section) continue;
    for (auto& [k, v] : sec.entries) {
      if (k == key) {
        v = std::move(value);
        return;
      }
    }
    sec.entries.emplace_back(key, std::move(value));
    return;
  }
  sections.push_back({section, {{key, std::move(value)}}});
}

std::string ConfigFile::serialize() const {
  std::string out;
  for (std::size_t i = 0; i < sections.size(); ++i) {
    if (i) out += '\n';
    out += '[' + sections[i].name + "]\n";
    for (const auto& [k, v] : sections[i].entries) {
      out += k + " = " + v + '\n';
    }
  }
  return out;
}

ConfigFile ConfigFile::parse(const std::string& text) {
  ConfigFile file;
  std::istringstream stream(text);
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(stream, raw)) {
    ++line_no;
    const std::string line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    if (line.front() == '[') {
      if (line.back() != ']' || line.size() < 3) {
        throw ConfigError("config: malformed section header on line " +
                          std::to_string(line_no));
      }
      file.sections.push_back({line.substr(1, line.size() - 2), {}});
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config: expected key = value on line " +
                        std::to_string(line_no));
    }
    if (file.sections.empty()) {
      throw ConfigError("config: entry before any [section] on line " +
                        std::to_string(line_no));
    }
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) {
      throw ConfigError("config: empty key on line " + std::to_string(line_no));
    }
    file.sections.back().entries.emplace_back(key,
                                              trim(line.substr(eq + 1)));
  }
  return file;
}

void RunConfig::set_preset(const std::string& name) {
  const ObjectiveConfig defaults = preset(name, 8);  // alpha/tau only
  preset_name = name;
  alpha = defaults.alpha;
  tau = defaults.tau;
}

NetworkSpec RunConfig::encoder_spec(std::size_t input_dim) const {
  NetworkSpec spec;
  spec.input_dim = input_dim;
  spec.layer_widths = encoder_widths;
  spec.normalize_output = encoder_normalize;
  return spec;
}

ObjectiveConfig RunConfig::objective() const {
  ObjectiveConfig cfg = preset(preset_name, encoder_widths.back());
  cfg.alpha = alpha;
  cfg.tau = tau;
  return cfg;
}

void RunConfig::validate() const {
  std::vector<std::string> bad;
  auto check = [&](bool ok, const char* key) {
    if (!ok) bad.push_back(key);
  };

  check(!out_dir.empty(), "run.out");
  check(log_every >= 1, "run.log_every");
  check(checkpoint_every >= 1, "run.checkpoint_every");

  check(data.n_content >= 1 && data.n_content <= 6, "data.n_content");
  check(data.n_style >= 1, "data.n_style");
  check(data.h >= 8 && data.w >= 8, "data.height/data.width");
  check(data.c == 1 || data.c == 3, "data.channels");
  check(data.samples_per_content >= 1, "data.samples_per_content");
  check(data.render_rule == 0, "data.render_rule");
  check(data.noise_std >= 0.0, "data.noise_std");

  try {
    augment.validate();
  } catch (const ConfigError& e) {
    bad.push_back(std::string("augment.* (") + e.what() + ")");
  }
  // The same encoder processes augmented training views and raw evaluation
  // images, so the augmentation output size must match the image size.
  if (dataset_path.empty()) {
    check(augment.out_h == data.h && augment.out_w == data.w,
          "augment.out_h/out_w (must equal data.height/data.width)");
  }

  check(!encoder_widths.empty(), "encoder.widths");
  for (const auto w : encoder_widths) {
    if (w == 0) {
      bad.push_back("encoder.widths");
      break;
    }
  }

  const bool preset_known = preset_name == "simclr" || preset_name == "relic" ||
                            preset_name == "amdim_style" ||
                            preset_name == "byol_style";
  check(preset_known, "objective.preset");
  check(alpha >= 0.0, "objective.alpha");
  check(tau > 0.0, "objective.tau");
  check(ema_tau_base > 0.0 && ema_tau_base <= 1.0, "objective.ema_tau_base");

  try {
    optimizer.validate();
  } catch (const ConfigError& e) {
    bad.push_back(std::string("optimizer.* (") + e.what() + ")");
  }

  check(eval.samples_per_content >= 1, "eval.samples_per_content");
  check(eval.probe_epochs >= 1, "eval.probe_epochs");
  check(!eval.probe_lr_grid.empty(), "eval.probe_lr_grid");
  for (const auto lr : eval.probe_lr_grid) {
    if (!(lr > 0.0)) {
      bad.push_back("eval.probe_lr_grid");
      break;
    }
  }
  check(eval.probe_momentum >= 0.0 && eval.probe_momentum < 1.0,
        "eval.probe_momentum");
  check(eval.graph_radius_b > 0.0, "eval.graph_radius_b");

  if (!bad.empty()) {
    std::string keys;
    for (std::size_t i = 0; i < bad.size(); ++i) {
      if (i) keys += ", ";
      keys += bad[i];
    }
    throw ConfigError("config: invalid keys: " + keys);
  }
}

ConfigFile RunConfig::to_config_file() const {
  ConfigFile f;
  f.set("run", "seed", std::to_string(seed));
  f.set("run", "out", out_dir);
  f.set("run", "log_every", std::to_string(log_every));
  f.set("run", "checkpoint_every", std::to_string(checkpoint_every));
  f.set("run", "stop_after", std::to_string(stop_after));

  f.set("data", "path", dataset_path);
  f.set("data", "n_content", std::to_string(data.n_content));
  f.set("data", "n_style", std::to_string(data.n_style));
  f.set("data", "height", std::to_string(data.h));
  f.set("data", "width", std::to_string(data.w));
  f.set("data", "channels", std::to_string(data.c));
  f.set("data", "samples_per_content", std::to_string(data.samples_per_content));
  f.set("data", "render_rule", std::to_string(data.render_rule));
  f.set("data", "noise_std", format_double(data.noise_std));

  f.set("augment", "crop_area_min", format_double(augment.crop_area_min));
  f.set("augment", "crop_area_max", format_double(augment.crop_area_max));
  f.set("augment", "aspect_min", format_double(augment.aspect_min));
  f.set("augment", "aspect_max", format_double(augment.aspect_max));
  f.set("augment", "out_h", std::to_string(augment.out_h));
  f.set("augment", "out_w", std::to_string(augment.out_w));
  f.set("augment", "flip_prob", format_double(augment.flip_prob));
  f.set("augment", "brightness", format_double(augment.brightness));
  f.set("augment", "contrast", format_double(augment.contrast));
  f.set("augment", "saturation", format_double(augment.saturation));
  f.set("augment", "hue", format_double(augment.hue));
  f.set("augment", "grayscale_prob", format_double(augment.grayscale_prob));
  f.set("augment", "blur_kernel", std::to_string(augment.blur_kernel));
  f.set("augment", "blur_sigma_min", format_double(augment.blur_sigma_min));
  f.set("augment", "blur_sigma_max", format_double(augment.blur_sigma_max));
  f.set("augment", "blur_prob", format_double(augment.blur_prob));
  f.set("augment", "solarize_prob", format_double(augment.solarize_prob));
  f.set("augment", "norm_mean", format_double_array(augment.norm_mean));
  f.set("augment", "norm_std", format_double_array(augment.norm_std));

  f.set("encoder", "widths", format_size_list(encoder_widths));
  f.set("encoder", "normalize_output", encoder_normalize ? "true" : "false");

  f.set("objective", "preset", preset_name);
  f.set("objective", "alpha", format_double(alpha));
  f.set("objective", "tau", format_double(tau));
  f.set("objective", "ema_tau_base", format_double(ema_tau_base));

  f.set("optimizer", "base_lr", format_double(optimizer.base_lr));
  f.set("optimizer", "batch_size", std::to_string(optimizer.batch_size));
  f.set("optimizer", "warmup_steps", std::to_string(optimizer.warmup_steps));
  f.set("optimizer", "total_steps", std::to_string(optimizer.total_steps));
  f.set("optimizer", "weight_decay", format_double(optimizer.weight_decay));
  f.set("optimizer", "momentum", format_double(optimizer.momentum));
  f.set("optimizer", "lars_eta", format_double(optimizer.lars_eta));
  f.set("optimizer", "exclude_bias_and_norm",
        optimizer.exclude_bias_and_norm ? "true" : "false");

  f.set("eval", "samples_per_content",
        std::to_string(eval.samples_per_content));
  f.set("eval", "probe_epochs", std::to_string(eval.probe_epochs));
  f.set("eval", "probe_lr_grid", format_double_list(eval.probe_lr_grid));
  f.set("eval", "probe_momentum", format_double(eval.probe_momentum));
  f.set("eval", "graph_radius_b", format_double(eval.graph_radius_b));
  return f;
}

std::string RunConfig::serialize() const { return to_config_file().serialize(); }

std::string RunConfig::identity_string() const {
  RunConfig copy = *this;
  copy.out_dir = RunConfig{}.out_dir;
  copy.stop_after = 0;
  return copy.serialize();
}

RunConfig parse_run_config(const std::string& text) {
  const ConfigFile file = ConfigFile::parse(text);
  RunConfig cfg;
  std::vector<std::string> unknown;

  for (const auto& sec : file.sections) {
    for (const auto& [key, value] : sec.entries) {
      const std::string full = sec.name + "." + key;
      if (sec.name == "run") {
        if (key == "seed") cfg.seed = parse_u64_value(value, full);
        else if (key == "out") cfg.out_dir = value;
        else if (key == "log_every")
          cfg.log_every = static_cast<std::size_t>(parse_u64_value(value, full));
        else if (key == "checkpoint_every")
          cfg.checkpoint_every =
              static_cast<std::size_t>(parse_u64_value(value, full));
        else if (key == "stop_after")
          cfg.stop_after = parse_u64_value(value, full);
        else unknown.push_back(full);
      } else if (sec.name == "data") {
        if (key == "path") cfg.dataset_path = value;
        else if (key == "n_content")
          cfg.data.n_content =
              static_cast<std::size_t>(parse_u64_value(value, full));
        else if (key == "n_style")
          cfg.data.n_style =
              static_cast<std::size_t>(parse_u64_value(value, full));
        else if (key == "height")
          cfg.data.h = static_cast<std::size_t>(parse_u64_value(value, full));
        else if (key == "width")
          cfg.data.w = static_cast<std::size_t>(parse_u64_value(value, full));
        else if (key == "channels")
          cfg.data.c = static_cast<std::size_t>(parse_u64_value(value, full));
        else if (key == "samples_per_content")
          cfg.data.samples_per_content =
              static_cast<std::size_t>(parse_u64_value(value, full));
        else if (key == "render_rule")
          cfg.data.render_rule =
              static_cast<std::size_t>(parse_u64_value(value, full));
        else if (key == "noise_std")
          cfg.data.noise_std = parse_double_value(value, full);
        else unknown.push_back(full);
      } else if (sec.name == "augment") {
        auto& a = cfg.augment;
        if (key == "crop_area_min") a.crop_area_min = parse_double_value(value, full);
        else if (key == "crop_area_max") a.crop_area_max = parse_double_value(value, full);
        else if (key == "aspect_min") a.aspect_min = parse_double_value(value, full);
        else if (key == "aspect_max") a.aspect_max = parse_double_value(value, full);
        else if (key == "out_h")
          a.out_h = static_cast<std::size_t>(parse_u64_value(value, full));
        else if (key == "out_w")
          a.out_w = static_cast<std::size_t>(parse_u64_value(value, full));
        else if (key == "flip_prob") a.flip_prob = parse_double_value(value, full);
        else if (key == "brightness") a.brightness = parse_double_value(value, full);
        else if (key == "contrast") a.contrast = parse_double_value(value, full);
        else if (key == "saturation") a.saturation = parse_double_value(value, full);
        else if (key == "hue") a.hue = parse_double_value(value, full);
        else if (key == "grayscale_prob") a.grayscale_prob = parse_double_value(value, full);
        else if (key == "blur_kernel")
          a.blur_kernel = static_cast<std::size_t>(parse_u64_value(value, full));
        else if (key == "blur_sigma_min") a.blur_sigma_min = parse_double_value(value, full);
        else if (key == "blur_sigma_max") a.blur_sigma_max = parse_double_value(value, full);
        else if (key == "blur_prob") a.blur_prob = parse_double_value(value, full);
        else if (key == "solarize_prob") a.solarize_prob = parse_double_value(value, full);
        else if (key == "norm_mean") a.norm_mean = parse_double_array<3>(value, full);
        else if (key == "norm_std") a.norm_std = parse_double_array<3>(value, full);
        else unknown.push_back(full);
      } else if (sec.name == "encoder") {
        if (key == "widths") cfg.encoder_widths = parse_size_list(value, full);
        else if (key == "normalize_output")
          cfg.encoder_normalize = parse_bool_value(value, full);
        else unknown.push_back(full);
      } else if (sec.name == "objective") {
        if (key == "preset") cfg.preset_name = value;
        else if (key == "alpha") cfg.alpha = parse_double_value(value, full);
        else if (key == "tau") cfg.tau = parse_double_value(value, full);
        else if (key == "ema_tau_base")
          cfg.ema_tau_base = parse_double_value(value, full);
        else unknown.push_back(full);
      } else if (sec.name == "optimizer") {
        auto& o = cfg.optimizer;
        if (key == "base_lr") o.base_lr = parse_double_value(value, full);
        else if (key == "batch_size")
          o.batch_size = static_cast<std::size_t>(parse_u64_value(value, full));
        else if (key == "warmup_steps")
          o.warmup_steps = static_cast<std::size_t>(parse_u64_value(value, full));
        else if (key == "total_steps")
          o.total_steps = static_cast<std::size_t>(parse_u64_value(value, full));
        else if (key == "weight_decay") o.weight_decay = parse_double_value(value, full);
        else if (key == "momentum") o.momentum = parse_double_value(value, full);
        else if (key == "lars_eta") o.lars_eta = parse_double_value(value, full);
        else if (key == "exclude_bias_and_norm")
          o.exclude_bias_and_norm = parse_bool_value(value, full);
        else unknown.push_back(full);
      } else if (sec.name == "eval") {
        auto& e = cfg.eval;
        if (key == "samples_per_content")
          e.samples_per_content =
              static_cast<std::size_t>(parse_u64_value(value, full));
        else if (key == "probe_epochs")
          e.probe_epochs = static_cast<std::size_t>(parse_u64_value(value, full));
        else if (key == "probe_lr_grid")
          e.probe_lr_grid = parse_double_list(value, full);
        else if (key == "probe_momentum")
          e.probe_momentum = parse_double_value(value, full);
        else if (key == "graph_radius_b")
          e.graph_radius_b = parse_double_value(value, full);
        else unknown.push_back(full);
      } else {
        unknown.push_back(full);
      }
    }
  }

  if (!unknown.empty()) {
    std::string keys;
    for (std::size_t i = 0; i < unknown.size(); ++i) {
      if (i) keys += ", ";
      keys += unknown[i];
    }
    throw ConfigError("config: unknown keys: " + keys);
  }
  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("config: cannot open " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_run_config(buffer.str());
}

void save_run_config(const RunConfig& cfg, const std::string& path) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("config: cannot write " + tmp);
    out << cfg.serialize();
    if (!out) throw ConfigError("config: write failed for " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    throw ConfigError("config: cannot rename " + tmp + " to " + path);
  }
}

bool operator==(const RunConfig& a, const RunConfig& b) {
  return a.serialize() == b.serialize();
}

}  // namespace relic
