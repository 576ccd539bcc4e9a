#include "relic/harness.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "relic/checkpoint.hpp"
#include "relic/errors.hpp"

namespace relic {
namespace {

namespace fs = std::filesystem;

std::string fresh_dir(const std::string& name) {
  const std::string dir = std::string(::testing::TempDir()) + name;
  fs::remove_all(dir);
  return dir;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  EXPECT_TRUE(in.good()) << path;
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

// Small but non-trivial run: two content classes, 16 images, 6 steps.
RunConfig tiny_config(const std::string& dir, std::uint64_t seed = 5) {
  RunConfig cfg;
  cfg.seed = seed;
  cfg.out_dir = dir;
  cfg.log_every = 2;
  cfg.checkpoint_every = 100;
  cfg.data.n_content = 2;
  cfg.data.n_style = 2;
  cfg.data.h = 8;
  cfg.data.w = 8;
  cfg.data.samples_per_content = 8;
  cfg.augment.out_h = 8;
  cfg.augment.out_w = 8;
  cfg.encoder_widths = {8, 4};
  cfg.optimizer.batch_size = 8;
  cfg.optimizer.warmup_steps = 2;
  cfg.optimizer.total_steps = 6;
  cfg.eval.samples_per_content = 6;
  cfg.eval.probe_epochs = 25;
  cfg.eval.probe_lr_grid = {0.5};
  return cfg;
}

// The named field values in file order, serialized exactly as logged.
std::vector<std::string> field_tokens(const std::string& log,
                                      const std::string& field) {
  std::vector<std::string> out;
  std::istringstream lines(log);
  std::string line;
  while (std::getline(lines, line)) {
    std::istringstream words(line);
    std::string word;
    while (words >> word) {
      if (word.rfind(field + "=", 0) == 0) out.push_back(word);
    }
  }
  return out;
}

TEST(MixSeed, SeparatesStreamsDeterministically) {
  EXPECT_EQ(mix_seed(0, kSaltTrainData), mix_seed(0, kSaltTrainData));
  EXPECT_NE(mix_seed(0, kSaltTrainData), mix_seed(0, kSaltEvalData));
  EXPECT_NE(mix_seed(0, kSaltBatch), mix_seed(1, kSaltBatch));
}

TEST(MetricsRecordTest, LineCarriesFieldsButNeverWallTime) {
  MetricsRecord record;
  record.kind = "train";
  record.step = 3;
  record.fields = {{"loss", 0.5}, {"lr", 0.25}};
  record.wall_time_s = 123.0;
  EXPECT_EQ(record.to_line(), "kind=train step=3 loss=0.5 lr=0.25");
}

TEST(Pretrain, WritesRunArtifactsAndPassesIntegrity) {
  const std::string dir = fresh_dir("run_artifacts");
  const RunConfig cfg = tiny_config(dir);
  const PretrainResult result = run_pretrain(cfg);

  EXPECT_EQ(result.start_step, 0u);
  EXPECT_EQ(result.final_step, 6u);
  EXPECT_TRUE(result.reached_total);
  EXPECT_TRUE(fs::exists(dir + "/config.txt"));
  EXPECT_TRUE(fs::exists(dir + "/metrics.log"));
  EXPECT_TRUE(fs::exists(dir + "/checkpoint-00000000.rlck"));
  EXPECT_TRUE(fs::exists(dir + "/checkpoint-00000006.rlck"));
  EXPECT_NO_THROW(check_run_integrity(dir));

  // The resolved copy reloads to the exact same configuration.
  EXPECT_TRUE(load_run_config(dir + "/config.txt") == cfg);
  fs::remove_all(dir);
}

TEST(Pretrain, IdenticalRunsProduceByteIdenticalLogsAndCheckpoints) {
  const std::string dir_a = fresh_dir("twin_a");
  const std::string dir_b = fresh_dir("twin_b");
  RunConfig cfg_a = tiny_config(dir_a);
  RunConfig cfg_b = tiny_config(dir_b);
  run_pretrain(cfg_a);
  run_pretrain(cfg_b);

  EXPECT_EQ(read_file(dir_a + "/metrics.log"), read_file(dir_b + "/metrics.log"));
  EXPECT_EQ(read_file(dir_a + "/checkpoint-00000006.rlck"),
            read_file(dir_b + "/checkpoint-00000006.rlck"));

  // Different seeds must diverge, or the twin comparison proves nothing.
  const std::string dir_c = fresh_dir("twin_c");
  run_pretrain(tiny_config(dir_c, 6));
  EXPECT_NE(field_tokens(read_file(dir_a + "/metrics.log"), "loss"),
            field_tokens(read_file(dir_c + "/metrics.log"), "loss"));
  fs::remove_all(dir_a);
  fs::remove_all(dir_b);
  fs::remove_all(dir_c);
}

TEST(Pretrain, InterruptedResumeMatchesUninterruptedRunBitwise) {
  const std::string dir_full = fresh_dir("resume_full");
  run_pretrain(tiny_config(dir_full));

  const std::string dir_paused = fresh_dir("resume_paused");
  RunConfig paused = tiny_config(dir_paused);
  paused.stop_after = 3;
  const PretrainResult first = run_pretrain(paused);
  EXPECT_EQ(first.final_step, 3u);
  EXPECT_FALSE(first.reached_total);
  EXPECT_TRUE(fs::exists(dir_paused + "/checkpoint-00000003.rlck"));

  paused.stop_after = 0;
  const PretrainResult second = run_pretrain(paused);
  EXPECT_EQ(second.start_step, 3u);
  EXPECT_EQ(second.final_step, 6u);
  EXPECT_TRUE(second.reached_total);

  EXPECT_EQ(read_file(dir_full + "/metrics.log"),
            read_file(dir_paused + "/metrics.log"));
  EXPECT_EQ(read_file(dir_full + "/checkpoint-00000006.rlck"),
            read_file(dir_paused + "/checkpoint-00000006.rlck"));
  fs::remove_all(dir_full);
  fs::remove_all(dir_paused);
}

TEST(Pretrain, FinishedRunIsANoOpOnRerun) {
  const std::string dir = fresh_dir("rerun");
  run_pretrain(tiny_config(dir));
  const std::string log_before = read_file(dir + "/metrics.log");
  const PretrainResult again = run_pretrain(tiny_config(dir));
  EXPECT_EQ(again.start_step, 6u);
  EXPECT_EQ(again.final_step, 6u);
  EXPECT_EQ(read_file(dir + "/metrics.log"), log_before);
  fs::remove_all(dir);
}

TEST(Pretrain, ResumeUnderDifferentConfigIsRejected) {
  const std::string dir = fresh_dir("resume_conflict");
  run_pretrain(tiny_config(dir, 5));
  EXPECT_THROW(run_pretrain(tiny_config(dir, 99)), ConfigError);
  fs::remove_all(dir);
}

TEST(Pretrain, SimclrMatchesRelicWithAlphaZero) {
  const std::string dir_simclr = fresh_dir("preset_simclr");
  RunConfig simclr = tiny_config(dir_simclr);
  simclr.set_preset("simclr");
  run_pretrain(simclr);

  const std::string dir_relic = fresh_dir("preset_relic0");
  RunConfig relic0 = tiny_config(dir_relic);
  relic0.set_preset("relic");
  relic0.alpha = 0.0;
  run_pretrain(relic0);

  const std::string log_a = read_file(dir_simclr + "/metrics.log");
  const std::string log_b = read_file(dir_relic + "/metrics.log");
  // The penalty column differs (simclr never evaluates the KL), but the
  // optimized objective and its trajectory must agree token for token.
  EXPECT_EQ(field_tokens(log_a, "loss"), field_tokens(log_b, "loss"));
  EXPECT_EQ(field_tokens(log_a, "contrastive"),
            field_tokens(log_b, "contrastive"));
  fs::remove_all(dir_simclr);
  fs::remove_all(dir_relic);
}

TEST(Pretrain, MismatchedAugmentOutputSizeIsRejected) {
  RunConfig cfg = tiny_config(fresh_dir("bad_dims"));
  cfg.augment.out_h = 12;
  EXPECT_THROW(run_pretrain(cfg), ConfigError);
}

TEST(RunIntegrity, MissingPiecesThrow) {
  const std::string dir = fresh_dir("integrity");
  EXPECT_THROW(check_run_integrity(dir), StateError);

  run_pretrain(tiny_config(dir));
  EXPECT_NO_THROW(check_run_integrity(dir));
  fs::remove(dir + "/metrics.log");
  EXPECT_THROW(check_run_integrity(dir), StateError);
  fs::remove_all(dir);
}

class EvalFixture : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fresh_dir("eval_run");
    cfg_ = tiny_config(dir_);
    run_pretrain(cfg_);
    ckpt_ = dir_ + "/checkpoint-00000006.rlck";
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string dir_;
  std::string ckpt_;
  RunConfig cfg_;
};

TEST_F(EvalFixture, EveryKindProducesADeterministicRecord) {
  for (const std::string kind : {"linear", "lda", "variance", "graph", "robust"}) {
    const MetricsRecord once = run_eval(kind, ckpt_, cfg_);
    const MetricsRecord twice = run_eval(kind, ckpt_, cfg_);
    EXPECT_EQ(once.to_line(), twice.to_line()) << kind;
    EXPECT_EQ(once.kind, "eval." + kind);
    EXPECT_EQ(once.step, 6u);
    EXPECT_FALSE(once.fields.empty());
  }

  // Records were appended to the run log (5 kinds x 2 calls).
  const std::string log = read_file(dir_ + "/metrics.log");
  std::size_t eval_lines = 0;
  std::istringstream lines(log);
  std::string line;
  while (std::getline(lines, line)) {
    if (line.rfind("kind=eval.", 0) == 0) ++eval_lines;
  }
  EXPECT_EQ(eval_lines, 10u);
}

TEST_F(EvalFixture, LinearAccuracyIsAProbability) {
  const MetricsRecord record = run_eval("linear", ckpt_, cfg_);
  ASSERT_EQ(record.fields[0].first, "accuracy");
  EXPECT_GE(record.fields[0].second, 0.0);
  EXPECT_LE(record.fields[0].second, 1.0);
}

TEST_F(EvalFixture, WrongConfigHashIsRejected) {
  RunConfig other = cfg_;
  other.seed = 77;
  EXPECT_THROW(run_eval("variance", ckpt_, other), FormatError);
}

TEST_F(EvalFixture, UnknownKindIsRejected) {
  EXPECT_THROW(run_eval("nope", ckpt_, cfg_), ConfigError);
}

TEST(VerifyDrivers, FuzzSampleHoldsAndSummarizes) {
  const VerifyOutcome outcome =
      verify_theorem1_fuzz(1500, 11, GridLimits{}, 1e-9, "");
  EXPECT_TRUE(outcome.ok);
  EXPECT_NE(outcome.summary.find("1500 models"), std::string::npos)
      << outcome.summary;
}

TEST(VerifyDrivers, GradientSuiteSmokeTestPasses) {
  const GradientSuiteReport report = gradient_suite(3, 2);
  EXPECT_TRUE(report.all_pass);
  EXPECT_GE(report.cases.size(), 20u);
  for (const auto& entry : report.cases) {
    EXPECT_LE(entry.max_rel_error, 1e-4) << entry.name;
  }
}

}  // namespace
}  // namespace relic
