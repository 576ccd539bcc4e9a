#include "relic/config.hpp"

#include <gtest/gtest.h>

#include <cstdio>
#include <cstdlib>
#include <string>

#include "relic/errors.hpp"

namespace relic {
namespace {

std::string temp_path(const std::string& name) {
  return std::string(::testing::TempDir()) + name;
}

TEST(ConfigFile, ParsePreservesOrderAndValues) {
  const std::string text =
      "# leading comment\n"
      "[alpha]\n"
      "first = 1\n"
      "second = two words\n"
      "\n"
      "[beta]\n"
      "path = /tmp/with spaces/x\n";
  const ConfigFile file = ConfigFile::parse(text);
  ASSERT_EQ(file.sections.size(), 2u);
  EXPECT_EQ(file.sections[0].name, "alpha");
  ASSERT_NE(file.find("alpha", "second"), nullptr);
  EXPECT_EQ(*file.find("alpha", "second"), "two words");
  EXPECT_EQ(*file.find("beta", "path"), "/tmp/with spaces/x");
  EXPECT_EQ(file.find("beta", "missing"), nullptr);

  // Round trip through text is stable.
  EXPECT_EQ(ConfigFile::parse(file.serialize()).serialize(), file.serialize());
}

TEST(ConfigFile, RejectsMalformedLines) {
  try {
    ConfigFile::parse("[a]\nno equals sign here\n");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
  EXPECT_THROW(ConfigFile::parse("key = before any section\n"), ConfigError);
  EXPECT_THROW(ConfigFile::parse("[unclosed\nkey = 1\n"), ConfigError);
  EXPECT_THROW(ConfigFile::parse("[a]\n = missing key\n"), ConfigError);
}

TEST(ConfigFile, FormatDoubleRoundTripsExactly) {
  const double cases[] = {1.0 / 3.0,
                          0.1,
                          -0.0,
                          1e-300,
                          1.7976931348623157e308,
                          3.141592653589793,
                          -2.2250738585072014e-308};
  for (const double v : cases) {
    const std::string text = format_double(v);
    EXPECT_EQ(std::strtod(text.c_str(), nullptr), v) << text;
  }
}

TEST(RunConfig, DefaultsSurviveRoundTrip) {
  const RunConfig cfg;
  const RunConfig back = parse_run_config(cfg.serialize());
  EXPECT_TRUE(cfg == back);
  EXPECT_EQ(back.preset_name, "relic");
  EXPECT_EQ(back.optimizer.batch_size, 256u);
}

TEST(RunConfig, PerturbedFieldsSurviveRoundTrip) {
  RunConfig cfg;
  cfg.seed = 1234567890123ULL;
  cfg.out_dir = "runs/space test";
  cfg.log_every = 7;
  cfg.checkpoint_every = 13;
  cfg.stop_after = 5;
  cfg.dataset_path = "data/some file.rlds";
  cfg.data.n_content = 6;
  cfg.data.samples_per_content = 17;
  cfg.data.h = 8;
  cfg.data.w = 12;
  cfg.data.c = 1;
  cfg.data.noise_std = 1.0 / 3.0;
  cfg.augment.brightness = 0.125;
  cfg.augment.hue = 0.05;
  cfg.augment.blur_prob = 0.75;
  cfg.augment.out_h = 8;
  cfg.augment.out_w = 12;
  cfg.encoder_widths = {8, 4};
  cfg.encoder_normalize = false;
  cfg.set_preset("amdim_style");
  cfg.alpha = 0.25;
  cfg.tau = 0.07;
  cfg.ema_tau_base = 0.5;
  cfg.optimizer.base_lr = 0.456;
  cfg.optimizer.batch_size = 32;
  cfg.optimizer.warmup_steps = 3;
  cfg.optimizer.total_steps = 77;
  cfg.optimizer.weight_decay = 1e-5;
  cfg.optimizer.exclude_bias_and_norm = false;
  cfg.eval.samples_per_content = 9;
  cfg.eval.probe_lr_grid = {0.2, 0.9};
  cfg.eval.graph_radius_b = 0.33;

  const RunConfig back = parse_run_config(cfg.serialize());
  EXPECT_TRUE(cfg == back);
  EXPECT_EQ(back.out_dir, "runs/space test");
  EXPECT_EQ(back.eval.probe_lr_grid.size(), 2u);
  EXPECT_DOUBLE_EQ(back.data.noise_std, 1.0 / 3.0);
}

TEST(RunConfig, UnknownKeysAreAllListed) {
  RunConfig cfg;
  ConfigFile file = cfg.to_config_file();
  file.set("run", "qux", "1");
  file.set("objective", "warmth", "high");
  try {
    parse_run_config(file.serialize());
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("run.qux"), std::string::npos) << what;
    EXPECT_NE(what.find("objective.warmth"), std::string::npos) << what;
  }
}

TEST(RunConfig, BadValuesAreRejected) {
  RunConfig cfg;
  ConfigFile file = cfg.to_config_file();
  file.set("objective", "alpha", "banana");
  EXPECT_THROW(parse_run_config(file.serialize()), ConfigError);

  file = RunConfig{}.to_config_file();
  file.set("objective", "tau", "0");
  EXPECT_THROW(parse_run_config(file.serialize()), ConfigError);

  file = RunConfig{}.to_config_file();
  file.set("data", "n_content", "9");
  EXPECT_THROW(parse_run_config(file.serialize()), ConfigError);

  file = RunConfig{}.to_config_file();
  file.set("run", "seed", "-3");
  EXPECT_THROW(parse_run_config(file.serialize()), ConfigError);
}

TEST(RunConfig, SetPresetRestoresPresetDefaults) {
  RunConfig cfg;
  cfg.alpha = 0.5;
  cfg.tau = 0.9;
  cfg.set_preset("simclr");
  EXPECT_EQ(cfg.preset_name, "simclr");
  EXPECT_DOUBLE_EQ(cfg.alpha, 0.0);
  EXPECT_DOUBLE_EQ(cfg.tau, 0.1);

  cfg.set_preset("relic");
  EXPECT_DOUBLE_EQ(cfg.alpha, 1.0);

  EXPECT_THROW(cfg.set_preset("unknown"), ConfigError);
}

TEST(RunConfig, IdentityStringIgnoresResumeOnlyKeys) {
  RunConfig a;
  RunConfig b;
  b.out_dir = "somewhere/else";
  b.stop_after = 42;
  EXPECT_EQ(a.identity_string(), b.identity_string());
  EXPECT_NE(a.serialize(), b.serialize());

  b.seed = 9;
  EXPECT_NE(a.identity_string(), b.identity_string());
}

TEST(RunConfig, SaveAndLoadFile) {
  RunConfig cfg;
  cfg.seed = 31;
  cfg.encoder_widths = {16, 8};
  const std::string path = temp_path("cfg_roundtrip.txt");
  save_run_config(cfg, path);
  const RunConfig back = load_run_config(path);
  EXPECT_TRUE(cfg == back);
  std::remove(path.c_str());

  EXPECT_THROW(load_run_config(temp_path("missing_config.txt")), ConfigError);
}

}  // namespace
}  // namespace relic
