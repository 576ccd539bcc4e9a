#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "relic/augment.hpp"
#include "relic/datagen.hpp"
#include "relic/network.hpp"
#include "relic/objective.hpp"

namespace relic {

// Line-oriented structured text: [section] headers, key = value entries,
// full-line # comments. Order-preserving so serialization is diff-able.
struct ConfigFile {
  struct Section {
    std::string name;
    std::vector<std::pair<std::string, std::string>> entries;
  };
  std::vector<Section> sections;

  const std::string* find(const std::string& section,
                          const std::string& key) const;
  void set(const std::string& section, const std::string& key,
           std::string value);

  std::string serialize() const;
  static ConfigFile parse(const std::string& text);  // throws ConfigError
};

// Doubles are printed with 17 significant digits so parse(serialize(x)) == x.
std::string format_double(double v);

struct EvalSettings {
  std::size_t samples_per_content = 125;  // held-out set size per class
  std::size_t probe_epochs = 200;
  std::vector<double> probe_lr_grid = {0.1, 0.3, 1.0};
  double probe_momentum = 0.9;
  double graph_radius_b = 0.5;
};

// Everything one run needs, resolvable entirely from defaults. The resolved
// copy is written into the run directory before step 0.
struct RunConfig {
  // [run]
  std::uint64_t seed = 0;
  std::string out_dir = "runs/run";
  std::size_t log_every = 50;
  std::size_t checkpoint_every = 1000;
  // Per-invocation step cap (0 = none). Excluded from the config identity
  // hash so an interrupted run can be resumed with the same config file.
  std::uint64_t stop_after = 0;

  // [data]; dataset_path empty means synthetic generation from `data`.
  std::string dataset_path;
  ContentStyleConfig data;

  // [augment]
  AugmentationSpec augment;

  // [encoder]
  std::vector<std::size_t> encoder_widths = {128, 64, 32};
  bool encoder_normalize = true;

  // [objective]; alpha/tau start at the preset values and may be overridden.
  std::string preset_name = "relic";
  double alpha = 1.0;
  double tau = 0.1;
  double ema_tau_base = 0.996;

  // [optimizer]
  OptimizerConfig optimizer;

  // [eval]
  EvalSettings eval;

  // Resets preset_name and restores that preset's alpha/tau defaults.
  void set_preset(const std::string& name);

  NetworkSpec encoder_spec(std::size_t input_dim) const;
  ObjectiveConfig objective() const;  // preset + alpha/tau overrides

  void validate() const;  // throws ConfigError listing offending keys

  ConfigFile to_config_file() const;
  std::string serialize() const;
  // The serialized form with out_dir and stop_after reset to defaults;
  // hashed into checkpoints to detect resumes under a different config.
  std::string identity_string() const;
};

RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::string& path);   // throws ConfigError
void save_run_config(const RunConfig& cfg, const std::string& path);

bool operator==(const RunConfig& a, const RunConfig& b);

}  // namespace relic
