// relic_lab: one binary for dataset generation, pretraining, evaluation,
// brute-force theory verification and checkpoint inspection.
//
// Exit codes: 0 success, 1 verification failure (or any runtime error),
// 2 configuration error, 3 file-format error.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <thread>

#include "CLI11.hpp"
#include "relic/checkpoint.hpp"
#include "relic/config.hpp"
#include "relic/datagen.hpp"
#include "relic/errors.hpp"
#include "relic/harness.hpp"
#include "relic/scm.hpp"

namespace fs = std::filesystem;

namespace {

struct CommonFlags {
  std::string config_path;
  std::uint64_t seed = 0;
  std::string out_dir;
  bool single_thread = false;
  std::string preset;
  double alpha = 0.0;
  double tau = 0.0;
  std::uint64_t stop_after = 0;
};

// CLI-provided values override the config file; --preset resets alpha/tau to
// the preset's values before --alpha/--tau apply on top.
relic::RunConfig resolve_config(const CLI::App& app, const CommonFlags& flags) {
  relic::RunConfig cfg;
  if (!flags.config_path.empty()) {
    cfg = relic::load_run_config(flags.config_path);
  }
  if (app.count("--preset") > 0) cfg.set_preset(flags.preset);
  if (app.count("--alpha") > 0) cfg.alpha = flags.alpha;
  if (app.count("--tau") > 0) cfg.tau = flags.tau;
  if (app.count("--seed") > 0) cfg.seed = flags.seed;
  if (app.count("--out") > 0) cfg.out_dir = flags.out_dir;
  if (app.count("--stop-after") > 0) cfg.stop_after = flags.stop_after;
  return cfg;
}

std::size_t resolve_threads(const CommonFlags& flags) {
  if (flags.single_thread) return 1;
  std::size_t n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("RELIC_LAB_THREADS")) {
    char* end = nullptr;
    const unsigned long parsed = std::strtoul(env, &end, 10);
    if (end == env || *end != '\0' || parsed == 0) {
      throw relic::ConfigError(
          "RELIC_LAB_THREADS must be a positive integer, got \"" +
          std::string(env) + "\"");
    }
    n = std::min<std::size_t>(n, parsed);
  }
  return n;
}

int cmd_gen_data(const relic::RunConfig& cfg) {
  const relic::LabeledDataset ds = relic::generate_content_style(
      cfg.data, relic::mix_seed(cfg.seed, relic::kSaltTrainData));
  fs::create_directories(cfg.out_dir);
  const std::string path = cfg.out_dir + "/dataset.rlds";
  relic::serialize_dataset(ds, path);
  std::cout << "wrote " << path << ": " << ds.images.n << " images "
            << ds.images.h << "x" << ds.images.w << "x" << ds.images.c << ", "
            << cfg.data.n_content << " content classes, " << cfg.data.n_style
            << " styles\n";
  return 0;
}

int cmd_pretrain(const relic::RunConfig& cfg, std::size_t threads) {
  const relic::PretrainResult result =
      relic::run_pretrain(cfg, threads, &std::cout);
  if (!result.reached_total) {
    std::cout << "paused at step " << result.final_step
              << "; rerun with the same config to resume\n";
  }
  return 0;
}

int cmd_eval(const CLI::App& root, const CommonFlags& flags,
             const std::string& kind, std::string checkpoint_path,
             std::size_t threads) {
  CommonFlags effective = flags;
  if (checkpoint_path.empty()) {
    // Without an explicit checkpoint, evaluate the latest one in --out.
    relic::RunConfig probe;
    if (!flags.config_path.empty()) probe = relic::load_run_config(flags.config_path);
    if (root.count("--out") > 0) probe.out_dir = flags.out_dir;
    checkpoint_path = relic::find_latest_checkpoint(probe.out_dir);
    if (checkpoint_path.empty()) {
      throw relic::ConfigError("eval: no checkpoint found in " + probe.out_dir +
                               "; pass --checkpoint or --out");
    }
  }
  if (effective.config_path.empty()) {
    // Default to the resolved config the run wrote next to its checkpoints.
    const std::string sibling =
        fs::path(checkpoint_path).parent_path() / "config.txt";
    if (fs::exists(sibling)) {
      effective.config_path = sibling;
    } else {
      throw relic::ConfigError("eval: no --config given and no config.txt " +
                               std::string("next to ") + checkpoint_path);
    }
  }
  const relic::RunConfig cfg = resolve_config(root, effective);
  relic::run_eval(kind, checkpoint_path, cfg, threads, &std::cout);
  return 0;
}

int cmd_verify(const CommonFlags& flags,
               const std::string& mode, std::uint64_t models, double tol,
               std::size_t configs_per_case, std::string archive_path) {
  if (archive_path.empty()) {
    const std::string dir = flags.out_dir.empty() ? "." : flags.out_dir;
    fs::create_directories(dir);
    archive_path = dir + "/counterexample.txt";
  }
  relic::VerifyOutcome outcome;
  if (mode == "theorem1-grid") {
    outcome = relic::verify_theorem1_grid(relic::GridLimits{}, tol,
                                          archive_path, &std::cout);
  } else if (mode == "theorem1-fuzz") {
    outcome = relic::verify_theorem1_fuzz(models, flags.seed,
                                          relic::GridLimits{}, tol,
                                          archive_path, &std::cout);
  } else if (mode == "gradient-suite") {
    outcome = relic::verify_gradient_suite(flags.seed, configs_per_case,
                                           &std::cout);
  } else {
    throw relic::ConfigError(
        "verify: unknown mode \"" + mode +
        "\" (expected theorem1-grid|theorem1-fuzz|gradient-suite)");
  }
  if (!outcome.ok) {
    std::cerr << "verification FAILED: " << outcome.summary << "\n";
    if (mode != "gradient-suite") {
      std::cerr << "counterexample archived at " << archive_path << "\n";
    }
    return 1;
  }
  return 0;
}

int cmd_inspect(const std::string& path) {
  const relic::Checkpoint ckpt = relic::load_checkpoint(path);
  std::cout << "checkpoint " << path << "\n"
            << "  version " << ckpt.version << "\n"
            << "  step " << ckpt.step << "\n"
            << "  config sha256 " << relic::hex_digest(ckpt.config_hash)
            << "\n"
            << "  tensors (" << ckpt.tensors.size() << "):\n";
  for (const auto& tensor : ckpt.tensors) {
    std::cout << "    " << tensor.name << " [";
    for (std::size_t i = 0; i < tensor.shape.size(); ++i) {
      std::cout << (i > 0 ? " " : "") << tensor.shape[i];
    }
    std::cout << "] " << tensor.values.size() << " values\n";
  }
  std::cout << "  rng states (" << ckpt.rng_states.size() << "):";
  for (const auto& rng : ckpt.rng_states) std::cout << " " << rng.name;
  std::cout << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"representation-learning lab: contrastive pretraining with "
               "invariance penalties, diagnostics, and brute-force checks of "
               "the refinement theory"};
  app.require_subcommand(1);
  app.fallthrough();

  CommonFlags flags;
  app.add_option("--config", flags.config_path, "run config file");
  app.add_option("--seed", flags.seed, "master seed (default 0)");
  app.add_option("--out", flags.out_dir, "output/run directory");
  app.add_flag("--single-thread", flags.single_thread,
               "force one worker (bit-reproducibility reference)");
  app.add_option("--preset", flags.preset,
                 "objective preset: simclr|relic|amdim_style|byol_style")
      ->check(CLI::IsMember({"simclr", "relic", "amdim_style", "byol_style"}));
  app.add_option("--alpha", flags.alpha, "invariance penalty weight override");
  app.add_option("--tau", flags.tau, "softmax temperature override");
  app.add_option("--stop-after", flags.stop_after,
                 "pause after this many steps this invocation (0 = run out)");

  CLI::App* gen = app.add_subcommand(
      "gen-data", "generate a synthetic content/style dataset");

  CLI::App* pretrain =
      app.add_subcommand("pretrain", "train an encoder per the config");

  CLI::App* eval_cmd =
      app.add_subcommand("eval", "evaluate a frozen checkpoint");
  std::string eval_kind = "linear";
  std::string eval_checkpoint;
  eval_cmd->add_option("--kind", eval_kind,
                       "linear|lda|robust|variance|graph")
      ->check(CLI::IsMember({"linear", "lda", "robust", "variance", "graph"}));
  eval_cmd->add_option("--checkpoint", eval_checkpoint,
                       "checkpoint file (default: latest in --out)");

  CLI::App* verify = app.add_subcommand(
      "verify", "brute-force theory and gradient verification");
  std::string verify_mode;
  std::uint64_t verify_models = 100000;
  double verify_tol = 1e-9;
  std::size_t verify_configs = 20;
  std::string verify_archive;
  verify->add_option("--mode", verify_mode,
                     "theorem1-grid|theorem1-fuzz|gradient-suite")
      ->required()
      ->check(CLI::IsMember({"theorem1-grid", "theorem1-fuzz",
                             "gradient-suite"}));
  verify->add_option("--models", verify_models,
                     "random models for theorem1-fuzz (default 100000)");
  verify->add_option("--tol", verify_tol,
                     "violation tolerance (default 1e-9)");
  verify->add_option("--configs-per-case", verify_configs,
                     "random configs per gradient case (default 20)");
  verify->add_option("--archive", verify_archive,
                     "counterexample path (default <out>/counterexample.txt)");

  CLI::App* inspect = app.add_subcommand(
      "inspect-checkpoint", "print a checkpoint's directory");
  std::string inspect_path;
  inspect->add_option("path", inspect_path, "checkpoint file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    const std::size_t threads = resolve_threads(flags);
    if (gen->parsed()) return cmd_gen_data(resolve_config(app, flags));
    if (pretrain->parsed()) {
      return cmd_pretrain(resolve_config(app, flags), threads);
    }
    if (eval_cmd->parsed()) {
      return cmd_eval(app, flags, eval_kind, eval_checkpoint, threads);
    }
    if (verify->parsed()) {
      return cmd_verify(flags, verify_mode, verify_models, verify_tol,
                        verify_configs, verify_archive);
    }
    if (inspect->parsed()) return cmd_inspect(inspect_path);
    std::cerr << "no subcommand\n";
    return 2;
  } catch (const relic::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const relic::FormatError& e) {
    std::cerr << "format error: " << e.what();
    if (e.byte_offset() != relic::FormatError::npos) {
      std::cerr << " (byte " << e.byte_offset() << ")";
    }
    std::cerr << "\n";
    return 3;
  } catch (const relic::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
