#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "relic/config.hpp"
#include "relic/scm.hpp"

namespace relic {

// One self-describing line per record. Wall time is carried for console
// progress only and never serialized, so logs of equal runs are byte-equal.
struct MetricsRecord {
  std::string kind = "train";
  std::uint64_t step = 0;
  std::vector<std::pair<std::string, double>> fields;
  double wall_time_s = 0.0;

  std::string to_line() const;
};

struct PretrainResult {
  std::string run_dir;
  std::uint64_t start_step = 0;
  std::uint64_t final_step = 0;
  bool reached_total = false;  // false when stop_after paused the run early
};

// Trains per the config, appending to <out>/metrics.log and writing RLCK
// checkpoints. A checkpoint already in the run directory resumes the run
// (its config hash must match). Deterministic for any thread count; the
// single-threaded path is the bit-reproducibility reference.
PretrainResult run_pretrain(const RunConfig& cfg, std::size_t n_threads = 1,
                            std::ostream* console = nullptr);

// Throws StateError unless the directory holds a resolved config copy, at
// least one checkpoint, and a metrics log.
void check_run_integrity(const std::string& run_dir);

// Path of the highest-step checkpoint-*.rlck in the directory, or "" when
// none exists. step_out receives its step when found.
std::string find_latest_checkpoint(const std::string& dir,
                                   std::uint64_t* step_out = nullptr);

// kind: linear | lda | robust | variance | graph. Loads the frozen encoder
// from the checkpoint (config hash must match cfg), computes the metric,
// appends the record to the run's metrics log and returns it.
MetricsRecord run_eval(const std::string& kind,
                       const std::string& checkpoint_path, const RunConfig& cfg,
                       std::size_t n_threads = 1,
                       std::ostream* console = nullptr);

struct VerifyOutcome {
  bool ok = false;
  std::string summary;
};

// Exhaustive/budgeted grid sweep; a found counterexample is archived at
// archive_path and ok goes false.
VerifyOutcome verify_theorem1_grid(const GridLimits& limits, double tol,
                                   const std::string& archive_path,
                                   std::ostream* console = nullptr);

VerifyOutcome verify_theorem1_fuzz(std::uint64_t models, std::uint64_t seed,
                                   const GridLimits& limits, double tol,
                                   const std::string& archive_path,
                                   std::ostream* console = nullptr);

struct GradientCase {
  std::string name;
  double max_rel_error = 0.0;
  bool pass = false;
};

struct GradientSuiteReport {
  std::vector<GradientCase> cases;
  double max_rel_error = 0.0;
  bool all_pass = false;
};

// Finite-difference checks for every differentiable op and every preset
// loss at `configs_per_case` random configurations each.
GradientSuiteReport gradient_suite(std::uint64_t seed,
                                   std::size_t configs_per_case = 20,
                                   std::ostream* console = nullptr);

VerifyOutcome verify_gradient_suite(std::uint64_t seed,
                                    std::size_t configs_per_case = 20,
                                    std::ostream* console = nullptr);

// Deterministic sub-seeds for the independent random streams of one run.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt);

inline constexpr std::uint64_t kSaltTrainData = 1;
inline constexpr std::uint64_t kSaltEvalData = 2;
inline constexpr std::uint64_t kSaltModelInit = 3;
inline constexpr std::uint64_t kSaltBatch = 4;
inline constexpr std::uint64_t kSaltAugment = 5;
inline constexpr std::uint64_t kSaltCorrupt = 6;

}  // namespace relic
