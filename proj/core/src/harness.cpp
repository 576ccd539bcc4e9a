#include "relic/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <ostream>
#include <sstream>

#include "relic/augment.hpp"
#include "relic/checkpoint.hpp"
#include "relic/datagen.hpp"
#include "relic/errors.hpp"
#include "relic/eval.hpp"
#include "relic/gradcheck.hpp"
#include "relic/objective.hpp"
#include "relic/rng.hpp"

namespace fs = std::filesystem;

namespace relic {
namespace {

constexpr const char* kConfigFileName = "config.txt";
constexpr const char* kMetricsFileName = "metrics.log";

std::string checkpoint_name(std::uint64_t step) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "checkpoint-%08llu.rlck",
                static_cast<unsigned long long>(step));
  return buf;
}

}  // namespace

std::string find_latest_checkpoint(const std::string& dir,
                                   std::uint64_t* step_out) {
  std::uint64_t best_step = 0;
  std::string best_path;
  if (!fs::exists(dir)) return best_path;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (name.rfind("checkpoint-", 0) != 0 ||
        name.size() < std::string("checkpoint-0.rlck").size() ||
        name.substr(name.size() - 5) != ".rlck") {
      continue;
    }
    const std::string digits = name.substr(11, name.size() - 16);
    if (digits.empty() ||
        digits.find_first_not_of("0123456789") != std::string::npos) {
      continue;
    }
    const std::uint64_t step = std::stoull(digits);
    if (best_path.empty() || step >= best_step) {
      best_step = step;
      best_path = entry.path().string();
    }
  }
  if (!best_path.empty() && step_out) *step_out = best_step;
  return best_path;
}

namespace {

std::vector<std::size_t> tensor_shape(const Tensor& t) { return t.shape(); }

void append_params(std::vector<NamedTensor>* out, const Parameters& params,
                   const std::string& prefix) {
  for (std::size_t l = 0; l < params.weights.size(); ++l) {
    out->push_back({prefix + ".w" + std::to_string(l),
                    tensor_shape(params.weights[l]),
                    params.weights[l].values()});
    out->push_back({prefix + ".b" + std::to_string(l),
                    tensor_shape(params.biases[l]),
                    params.biases[l].values()});
  }
}

void append_momentum(std::vector<NamedTensor>* out, const OptimizerState& state,
                     const Parameters& params, const std::string& prefix) {
  const auto tensors = params.trainable();
  for (std::size_t i = 0; i < state.momentum.size(); ++i) {
    const std::size_t layer = i / 2;
    const std::string suffix =
        (i % 2 == 0 ? ".w" : ".b") + std::to_string(layer);
    std::vector<double> values = state.momentum[i];
    if (values.empty()) values.assign(tensors[i].numel(), 0.0);
    out->push_back({prefix + suffix, {values.size()}, std::move(values)});
  }
}

void restore_params(const Checkpoint& ckpt, const std::string& prefix,
                    Parameters* params) {
  for (std::size_t l = 0; l < params->weights.size(); ++l) {
    for (const bool is_weight : {true, false}) {
      const std::string name =
          prefix + (is_weight ? ".w" : ".b") + std::to_string(l);
      const NamedTensor* stored = ckpt.find(name);
      if (stored == nullptr) {
        throw FormatError("checkpoint: missing tensor " + name);
      }
      Tensor t = is_weight ? params->weights[l] : params->biases[l];
      if (stored->shape != t.shape()) {
        throw FormatError("checkpoint: shape mismatch for " + name);
      }
      t.mutable_values() = stored->values;
    }
  }
}

void restore_momentum(const Checkpoint& ckpt, const std::string& prefix,
                      const Parameters& params, OptimizerState* state) {
  const auto tensors = params.trainable();
  state->momentum.assign(tensors.size(), {});
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    const std::size_t layer = i / 2;
    const std::string name =
        prefix + (i % 2 == 0 ? ".w" : ".b") + std::to_string(layer);
    const NamedTensor* stored = ckpt.find(name);
    if (stored == nullptr) {
      throw FormatError("checkpoint: missing tensor " + name);
    }
    if (stored->values.size() != tensors[i].numel()) {
      throw FormatError("checkpoint: shape mismatch for " + name);
    }
    state->momentum[i] = stored->values;
  }
}

ImageBatch image_subset(const ImageBatch& batch,
                        const std::vector<std::size_t>& indices) {
  ImageBatch out = ImageBatch::zeros(indices.size(), batch.h, batch.w, batch.c);
  const std::size_t per = batch.pixels_per_image();
  for (std::size_t i = 0; i < indices.size(); ++i) {
    std::copy_n(batch.pixels.begin() + indices[i] * per, per,
                out.pixels.begin() + i * per);
  }
  return out;
}

LabeledDataset load_train_dataset(const RunConfig& cfg) {
  if (!cfg.dataset_path.empty()) return deserialize_dataset(cfg.dataset_path);
  return generate_content_style(cfg.data, mix_seed(cfg.seed, kSaltTrainData));
}

LabeledDataset load_eval_dataset(const RunConfig& cfg) {
  if (!cfg.dataset_path.empty()) return deserialize_dataset(cfg.dataset_path);
  ContentStyleConfig eval_cfg = cfg.data;
  eval_cfg.samples_per_content = cfg.eval.samples_per_content;
  return generate_content_style(eval_cfg, mix_seed(cfg.seed, kSaltEvalData));
}

struct TrainerState {
  ModelParams model;
  OptimizerState encoder_state;
  OptimizerState critic_state;
  OptimizerState predictor_state;
  Rng batch_rng;
};

Checkpoint make_checkpoint(const RunConfig& cfg, const TrainerState& state,
                           std::uint64_t step) {
  Checkpoint ckpt;
  ckpt.config_hash = sha256_bytes(cfg.identity_string());
  ckpt.step = step;

  const ModelParams& m = state.model;
  append_params(&ckpt.tensors, m.encoder, "online.encoder");
  append_momentum(&ckpt.tensors, state.encoder_state, m.encoder,
                  "momentum.encoder");
  if (!m.critic.weights.empty()) {
    append_params(&ckpt.tensors, m.critic, "online.critic");
    append_momentum(&ckpt.tensors, state.critic_state, m.critic,
                    "momentum.critic");
  }
  if (m.use_predictor) {
    append_params(&ckpt.tensors, m.predictor, "online.predictor");
    append_momentum(&ckpt.tensors, state.predictor_state, m.predictor,
                    "momentum.predictor");
  }
  if (m.use_target) {
    append_params(&ckpt.tensors, m.target_encoder, "target.encoder");
    if (!m.target_critic.weights.empty()) {
      append_params(&ckpt.tensors, m.target_critic, "target.critic");
    }
  }

  ckpt.rng_states.push_back({"batch", state.batch_rng.state()});
  ckpt.rng_states.push_back({"init.encoder", m.encoder.rng_state});
  if (!m.critic.weights.empty()) {
    ckpt.rng_states.push_back({"init.critic", m.critic.rng_state});
  }
  if (m.use_predictor) {
    ckpt.rng_states.push_back({"init.predictor", m.predictor.rng_state});
  }
  return ckpt;
}

void restore_trainer_state(const Checkpoint& ckpt, TrainerState* state) {
  ModelParams& m = state->model;
  restore_params(ckpt, "online.encoder", &m.encoder);
  restore_momentum(ckpt, "momentum.encoder", m.encoder, &state->encoder_state);
  if (!m.critic.weights.empty()) {
    restore_params(ckpt, "online.critic", &m.critic);
    restore_momentum(ckpt, "momentum.critic", m.critic, &state->critic_state);
  }
  if (m.use_predictor) {
    restore_params(ckpt, "online.predictor", &m.predictor);
    restore_momentum(ckpt, "momentum.predictor", m.predictor,
                     &state->predictor_state);
  }
  if (m.use_target) {
    restore_params(ckpt, "target.encoder", &m.target_encoder);
    if (!m.target_critic.weights.empty()) {
      restore_params(ckpt, "target.critic", &m.target_critic);
    }
  }
  m.encoder.step = ckpt.step;
  if (!m.critic.weights.empty()) m.critic.step = ckpt.step;
  if (m.use_predictor) m.predictor.step = ckpt.step;

  bool have_batch_rng = false;
  for (const auto& rng : ckpt.rng_states) {
    if (rng.name == "batch") {
      state->batch_rng.set_state(rng.state);
      have_batch_rng = true;
    } else if (rng.name == "init.encoder") {
      m.encoder.rng_state = rng.state;
    } else if (rng.name == "init.critic") {
      m.critic.rng_state = rng.state;
    } else if (rng.name == "init.predictor") {
      m.predictor.rng_state = rng.state;
    }
  }
  if (!have_batch_rng) {
    throw FormatError("checkpoint: missing rng state \"batch\"");
  }
}

void write_metrics_line(std::ofstream& log, const MetricsRecord& record) {
  log << record.to_line() << '\n';
  log.flush();
  if (!log) throw StateError("pretrain: metrics log write failed");
}

}  // namespace

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t x = seed ^ (0x9e3779b97f4a7c15ULL * (salt + 1));
  return Rng::splitmix64(x);
}

std::string MetricsRecord::to_line() const {
  std::string line = "kind=" + kind + " step=" + std::to_string(step);
  for (const auto& [name, value] : fields) {
    line += ' ' + name + '=' + format_double(value);
  }
  return line;
}

PretrainResult run_pretrain(const RunConfig& cfg, std::size_t n_threads,
                            std::ostream* console) {
  cfg.validate();
  const auto wall_start = std::chrono::steady_clock::now();
  const std::string dir = cfg.out_dir;
  fs::create_directories(dir);

  const LabeledDataset train = load_train_dataset(cfg);
  if (train.images.h != cfg.augment.out_h ||
      train.images.w != cfg.augment.out_w) {
    throw ConfigError(
        "pretrain: augment.out_h/out_w must match the dataset image size so "
        "the encoder sees one input width in training and evaluation");
  }
  const std::size_t input_dim =
      train.images.h * train.images.w * train.images.c;
  const NetworkSpec enc_spec = cfg.encoder_spec(input_dim);
  const ObjectiveConfig obj = cfg.objective();
  obj.validate();

  TrainerState state{
      init_model(enc_spec, obj, mix_seed(cfg.seed, kSaltModelInit)),
      {},
      {},
      {},
      Rng(mix_seed(cfg.seed, kSaltBatch))};
  const Rng augment_base(mix_seed(cfg.seed, kSaltAugment));

  std::uint64_t start_step = 0;
  const std::string existing = find_latest_checkpoint(dir, &start_step);
  if (existing.empty()) {
    start_step = 0;
    save_run_config(cfg, dir + "/" + kConfigFileName);
    // Create the log up front so even a zero-step run satisfies the
    // run-directory integrity contract.
    std::ofstream(dir + "/" + kMetricsFileName, std::ios::app).flush();
    save_checkpoint(make_checkpoint(cfg, state, 0),
                    dir + "/" + checkpoint_name(0));
  } else {
    const Checkpoint ckpt = load_checkpoint(existing);
    if (ckpt.config_hash != sha256_bytes(cfg.identity_string())) {
      throw ConfigError("pretrain: checkpoint in " + dir +
                        " was written under a different config");
    }
    restore_trainer_state(ckpt, &state);
    start_step = ckpt.step;
  }

  const std::uint64_t total = cfg.optimizer.total_steps;
  std::uint64_t end_step = total;
  if (cfg.stop_after != 0) {
    end_step = std::min<std::uint64_t>(total, start_step + cfg.stop_after);
  }

  std::ofstream log(dir + "/" + kMetricsFileName,
                    std::ios::app | std::ios::binary);
  if (!log) throw StateError("pretrain: cannot open metrics log in " + dir);

  PretrainResult result;
  result.run_dir = dir;
  result.start_step = start_step;

  const std::size_t n = train.images.n;
  std::uint64_t last_saved = start_step;
  for (std::uint64_t k = start_step; k < end_step; ++k) {
    std::vector<std::size_t> batch(cfg.optimizer.batch_size);
    for (auto& index : batch) {
      index = static_cast<std::size_t>(state.batch_rng.below(n));
    }
    const ImageBatch selected = image_subset(train.images, batch);
    const ImageBatch view1 = augment_deterministic(selected, cfg.augment,
                                                   augment_base, 2 * k,
                                                   n_threads);
    const ImageBatch view2 = augment_deterministic(selected, cfg.augment,
                                                   augment_base, 2 * k + 1,
                                                   n_threads);

    Tape tape;
    LossParts parts;
    {
      Tape::Scope scope(tape);
      parts = relic_loss(flatten(view1), flatten(view2), state.model, obj);
    }
    const double loss_value = parts.total.item();
    if (!std::isfinite(loss_value)) {
      throw NumericError("pretrain: non-finite loss at step " +
                             std::to_string(k) +
                             "; last-good checkpoint retained",
                         static_cast<std::ptrdiff_t>(k));
    }
    tape.backward(parts.total);

    // Validate every adjoint before any parameter set steps so an abort
    // cannot leave the sets inconsistent with one another.
    for (const Tensor& t : state.model.trainable()) {
      for (const double g : t.adjoint()) {
        if (!std::isfinite(g)) {
          throw NumericError("pretrain: non-finite gradient at step " +
                                 std::to_string(k) +
                                 "; last-good checkpoint retained",
                             static_cast<std::ptrdiff_t>(k));
        }
      }
    }

    const double lr = cosine_schedule(k, cfg.optimizer);
    lars_step(state.model.encoder, state.encoder_state, cfg.optimizer, lr);
    if (!state.model.critic.weights.empty()) {
      lars_step(state.model.critic, state.critic_state, cfg.optimizer, lr);
    }
    if (state.model.use_predictor) {
      lars_step(state.model.predictor, state.predictor_state, cfg.optimizer,
                lr);
    }

    double tau_value = 1.0;
    if (state.model.use_target) {
      tau_value = ema_tau(k, total, cfg.ema_tau_base);
      ema_update(state.model.encoder, state.model.target_encoder, k, total,
                 cfg.ema_tau_base);
      if (!state.model.target_critic.weights.empty()) {
        ema_update(state.model.critic, state.model.target_critic, k, total,
                   cfg.ema_tau_base);
      }
    }

    if (k % cfg.log_every == 0 || k + 1 == total) {
      MetricsRecord record;
      record.kind = "train";
      record.step = k;
      record.fields = {{"loss", loss_value},
                       {"contrastive", parts.contrastive.item()},
                       {"penalty", parts.penalty.item()},
                       {"lr", lr},
                       {"ema_tau", tau_value}};
      record.wall_time_s =
          std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                        wall_start)
              .count();
      write_metrics_line(log, record);
      if (console) {
        *console << "step " << k << "/" << total << " loss "
                 << format_double(loss_value) << " lr " << format_double(lr)
                 << " wall " << record.wall_time_s << "s\n";
      }
    }

    const std::uint64_t done = k + 1;
    if (done % cfg.checkpoint_every == 0 || done == end_step) {
      save_checkpoint(make_checkpoint(cfg, state, done),
                      dir + "/" + checkpoint_name(done));
      last_saved = done;
    }
  }

  if (last_saved != end_step && end_step != start_step) {
    save_checkpoint(make_checkpoint(cfg, state, end_step),
                    dir + "/" + checkpoint_name(end_step));
  }

  result.final_step = end_step;
  result.reached_total = end_step == total;
  check_run_integrity(dir);
  if (console) {
    *console << "pretrain finished at step " << end_step << "/" << total
             << " in " << dir << "\n";
  }
  return result;
}

void check_run_integrity(const std::string& run_dir) {
  if (!fs::exists(run_dir + "/" + kConfigFileName)) {
    throw StateError("run integrity: missing resolved config copy in " +
                     run_dir);
  }
  if (!fs::exists(run_dir + "/" + kMetricsFileName)) {
    throw StateError("run integrity: missing metrics log in " + run_dir);
  }
  std::uint64_t step = 0;
  if (find_latest_checkpoint(run_dir, &step).empty()) {
    throw StateError("run integrity: no checkpoint in " + run_dir);
  }
}

namespace {

Parameters encoder_from_checkpoint(const Checkpoint& ckpt,
                                   const NetworkSpec& spec) {
  Parameters params;
  std::size_t fan_in = spec.input_dim;
  for (std::size_t l = 0; l < spec.layer_widths.size(); ++l) {
    const std::string wname = "online.encoder.w" + std::to_string(l);
    const std::string bname = "online.encoder.b" + std::to_string(l);
    const NamedTensor* w = ckpt.find(wname);
    const NamedTensor* b = ckpt.find(bname);
    if (w == nullptr || b == nullptr) {
      throw FormatError("checkpoint: missing tensor " + wname);
    }
    const std::vector<std::size_t> wshape = {fan_in, spec.layer_widths[l]};
    const std::vector<std::size_t> bshape = {1, spec.layer_widths[l]};
    if (w->shape != wshape || b->shape != bshape) {
      throw FormatError("checkpoint: encoder shape incompatible with config at " +
                        wname);
    }
    params.weights.push_back(Tensor::from(w->values, wshape));
    params.biases.push_back(Tensor::from(b->values, bshape));
    fan_in = spec.layer_widths[l];
  }
  params.step = ckpt.step;
  return params;
}

ProbeConfig probe_config_from(const RunConfig& cfg) {
  ProbeConfig probe;
  probe.protocol = ProbeProtocol::full_batch;
  probe.epochs = cfg.eval.probe_epochs;
  probe.lr_grid = cfg.eval.probe_lr_grid;
  probe.momentum = cfg.eval.probe_momentum;
  probe.seed = cfg.seed;
  return probe;
}

}  // namespace

MetricsRecord run_eval(const std::string& kind,
                       const std::string& checkpoint_path, const RunConfig& cfg,
                       std::size_t n_threads, std::ostream* console) {
  (void)n_threads;  // evaluation is deterministic and cheap; single-threaded
  cfg.validate();
  const Checkpoint ckpt = load_checkpoint(checkpoint_path);
  if (ckpt.config_hash != sha256_bytes(cfg.identity_string())) {
    throw FormatError(
        "eval: checkpoint config hash does not match the given config");
  }

  const LabeledDataset test = load_eval_dataset(cfg);
  const std::size_t input_dim = test.images.h * test.images.w * test.images.c;
  const NetworkSpec enc_spec = cfg.encoder_spec(input_dim);
  const Parameters encoder = encoder_from_checkpoint(ckpt, enc_spec);

  const Tensor test_reps = encode(encoder, enc_spec, flatten(test.images));

  MetricsRecord record;
  record.kind = "eval." + kind;
  record.step = ckpt.step;

  if (kind == "linear") {
    const LabeledDataset train = load_train_dataset(cfg);
    const Tensor train_reps = encode(encoder, enc_spec, flatten(train.images));
    const double accuracy =
        linear_probe_transfer(train_reps, train.content_labels, test_reps,
                              test.content_labels, probe_config_from(cfg));
    record.fields = {{"accuracy", accuracy}};
  } else if (kind == "lda") {
    const LdaReport report = fisher_lda(test_reps, test.content_labels);
    record.fields = {
        {"median_f", report.median_defined ? report.median : -1.0},
        {"pairs", static_cast<double>(report.pairs.size())},
        {"degenerate", static_cast<double>(report.degenerate_count)}};
    if (console) {
      *console << "F_LDA per ordered class pair:\n";
      for (const auto& pair : report.pairs) {
        *console << "  (" << pair.class_a << " -> " << pair.class_b << ") ";
        if (pair.degenerate) {
          *console << "degenerate\n";
        } else {
          *console << format_double(pair.f) << "\n";
        }
      }
    }
  } else if (kind == "variance") {
    const ClassVarianceReport report = class_variance(test_reps, test.content_labels);
    double mean_sigma = 0.0;
    std::size_t classes = 0;
    for (std::size_t c = 0; c < report.per_class.size(); ++c) {
      if (report.class_size[c] == 0) continue;
      mean_sigma += report.per_class[c];
      ++classes;
    }
    mean_sigma /= static_cast<double>(classes);
    record.fields = {{"mean_class_variance", mean_sigma},
                     {"pooled_variance", report.pooled}};
  } else if (kind == "robust") {
    const LabeledDataset train = load_train_dataset(cfg);
    const Tensor train_reps = encode(encoder, enc_spec, flatten(train.images));
    const ProbeModel probe =
        fit_probe(train_reps, train.content_labels, probe_config_from(cfg));
    const double clean_error =
        100.0 * (1.0 - probe_model_accuracy(probe, test_reps, test.content_labels));

    ErrorTable table;
    table.clean_error = clean_error;
    double increase_sum = 0.0;
    const CorruptionKind kinds[] = {CorruptionKind::gaussian_noise,
                                    CorruptionKind::shot_noise,
                                    CorruptionKind::impulse_noise};
    for (std::size_t ki = 0; ki < 3; ++ki) {
      CorruptionErrorRow row;
      row.kind = kinds[ki];
      row.normalizer = default_normalizer(kinds[ki]);
      for (std::size_t sev = 1; sev <= kSeverityCount; ++sev) {
        const ImageBatch corrupted =
            corrupt(test.images, kinds[ki], static_cast<int>(sev),
                    mix_seed(cfg.seed, kSaltCorrupt + ki * 8 + sev));
        const Tensor reps = encode(encoder, enc_spec, flatten(corrupted));
        const double error =
            100.0 * (1.0 - probe_model_accuracy(probe, reps, test.content_labels));
        row.severity_error[sev - 1] = error;
        increase_sum += error - clean_error;
      }
      table.rows.push_back(row);
    }
    const RobustnessReport report = mce_rce(table);

    record.fields = {{"clean_error", clean_error}};
    for (const auto& row : report.rows) {
      record.fields.emplace_back("ce_" + to_string(row.kind), row.ce);
    }
    record.fields.emplace_back("mce", report.mce);
    for (const auto& row : report.rows) {
      if (row.rce_defined) {
        record.fields.emplace_back("rce_" + to_string(row.kind), row.rce);
      }
    }
    if (report.mrce_defined) {
      record.fields.emplace_back("mrce", report.mrce);
    }
    record.fields.emplace_back("mean_error_increase",
                               increase_sum / (3.0 * kSeverityCount));
    if (console) {
      *console << "severity errors (%) by corruption:\n";
      for (const auto& row : table.rows) {
        *console << "  " << to_string(row.kind) << ":";
        for (const auto e : row.severity_error) {
          *console << ' ' << format_double(e);
        }
        *console << '\n';
      }
      for (const auto& warning : report.warnings) {
        *console << "  warning: " << warning << '\n';
      }
    }
  } else if (kind == "graph") {
    const OverlapDiagnostics diag =
        overlap_graph_diagnostics(test_reps, cfg.eval.graph_radius_b);
    record.fields = {
        {"nodes", static_cast<double>(diag.nodes)},
        {"edges", static_cast<double>(diag.edges)},
        {"connected", diag.connected ? 1.0 : 0.0},
        {"diameter",
         diag.diameter_finite ? static_cast<double>(diag.diameter) : -1.0}};
  } else {
    throw ConfigError("eval: unknown kind \"" + kind +
                      "\" (expected linear|lda|robust|variance|graph)");
  }

  fs::create_directories(cfg.out_dir);
  std::ofstream log(cfg.out_dir + "/" + kMetricsFileName,
                    std::ios::app | std::ios::binary);
  if (!log) throw StateError("eval: cannot open metrics log in " + cfg.out_dir);
  write_metrics_line(log, record);

  if (console) {
    *console << record.to_line() << '\n';
  }
  return record;
}

VerifyOutcome verify_theorem1_grid(const GridLimits& limits, double tol,
                                   const std::string& archive_path,
                                   std::ostream* console) {
  std::function<void(std::uint64_t)> progress;
  if (console) {
    progress = [console](std::uint64_t models) {
      *console << "  ... " << models << " models checked\n";
    };
  }
  const SweepResult result = sweep_theorem1_grid(limits, tol, progress);

  VerifyOutcome outcome;
  outcome.ok = result.violations == 0;
  std::ostringstream summary;
  summary << "theorem1-grid: " << result.violations << " violations / "
          << result.models << " models checked (antecedent held in "
          << result.antecedent_true << ")";
  outcome.summary = summary.str();
  if (!outcome.ok && result.first_counterexample && !archive_path.empty()) {
    std::ofstream out(archive_path, std::ios::trunc);
    out << *result.first_counterexample;
  }
  if (console) *console << outcome.summary << '\n';
  return outcome;
}

VerifyOutcome verify_theorem1_fuzz(std::uint64_t models, std::uint64_t seed,
                                   const GridLimits& limits, double tol,
                                   const std::string& archive_path,
                                   std::ostream* console) {
  const SweepResult result = sweep_theorem1_fuzz(models, seed, limits, tol);
  VerifyOutcome outcome;
  outcome.ok = result.violations == 0;
  std::ostringstream summary;
  summary << "theorem1-fuzz: " << result.violations << " violations / "
          << result.models << " models checked (seed " << seed
          << ", antecedent held in " << result.antecedent_true << ")";
  outcome.summary = summary.str();
  if (!outcome.ok && result.first_counterexample && !archive_path.empty()) {
    std::ofstream out(archive_path, std::ios::trunc);
    out << *result.first_counterexample;
  }
  if (console) *console << outcome.summary << '\n';
  return outcome;
}

// ---------------------------------------------------------------------------
// Gradient suite
// ---------------------------------------------------------------------------

namespace {

Tensor random_tensor(Rng& rng, const std::vector<std::size_t>& shape,
                     double lo, double hi, bool requires_grad) {
  std::size_t numel = 1;
  for (const auto d : shape) numel *= d;
  std::vector<double> values(numel);
  for (auto& v : values) v = rng.uniform(lo, hi);
  return Tensor::from(std::move(values), shape, requires_grad);
}

// Uniform values bounded away from zero so relu kinks cannot sit inside the
// finite-difference stencil.
Tensor random_signed_away_from_zero(Rng& rng,
                                    const std::vector<std::size_t>& shape,
                                    bool requires_grad) {
  std::size_t numel = 1;
  for (const auto d : shape) numel *= d;
  std::vector<double> values(numel);
  for (auto& v : values) {
    const double magnitude = rng.uniform(0.05, 1.0);
    v = rng.bernoulli(0.5) ? magnitude : -magnitude;
  }
  return Tensor::from(std::move(values), shape, requires_grad);
}

// Scalarizes an output with fixed random weights so every coordinate
// contributes to the checked gradient.
Tensor weighted_mean(const Tensor& out, const Tensor& weights) {
  return mean(mul(out, weights));
}

// The suite checks gradient correctness, so sampled configurations must be
// differentiable: a relu pre-activation inside the finite-difference stencil
// or an all-dead row feeding l2_normalize (a jump at the zero vector) would
// make the oracle disagree with a correct adjoint. Forward-walk the network
// and record the distances to both kinds of kink.
struct SmoothnessProbe {
  double min_preact = std::numeric_limits<double>::infinity();
  double min_row_norm = std::numeric_limits<double>::infinity();

  bool ok() const { return min_preact > 1e-3 && min_row_norm > 0.05; }
};

Tensor probe_network(const Parameters& params, const NetworkSpec& spec,
                     const Tensor& input, SmoothnessProbe* probe) {
  Tensor x = input;
  for (std::size_t l = 0; l < params.weights.size(); ++l) {
    const Tensor z = add(matmul(x, params.weights[l]), params.biases[l]);
    if (l + 1 < params.weights.size()) {
      for (const double v : z.values()) {
        probe->min_preact = std::min(probe->min_preact, std::abs(v));
      }
      x = relu(z);
    } else {
      x = z;
    }
  }
  if (spec.normalize_output) {
    const std::size_t cols = x.shape()[1];
    for (std::size_t r = 0; r < x.shape()[0]; ++r) {
      double sq = 0.0;
      for (std::size_t c = 0; c < cols; ++c) {
        const double v = x.values()[r * cols + c];
        sq += v * v;
      }
      probe->min_row_norm = std::min(probe->min_row_norm, std::sqrt(sq));
    }
    x = l2_normalize(x, 1);
  }
  return x;
}

// Target copies share values with the online branch at init, so probing the
// online branches covers every network the loss evaluates.
bool model_smooth_at(const ModelParams& model, const ObjectiveConfig& cfg,
                     const NetworkSpec& enc, const Tensor& v1,
                     const Tensor& v2) {
  SmoothnessProbe probe;
  for (const Tensor* view : {&v1, &v2}) {
    const Tensor embedded = probe_network(model.encoder, enc, *view, &probe);
    if (!cfg.critic_identity) {
      const Tensor projected =
          probe_network(model.critic, cfg.critic, embedded, &probe);
      if (model.use_predictor) {
        probe_network(model.predictor, cfg.predictor, projected, &probe);
      }
    }
  }
  return probe.ok();
}

struct SuiteCase {
  std::string name;
  // Builds a loss closure plus the parameter list for one random config.
  std::function<std::pair<std::function<Tensor()>, std::vector<Tensor>>(Rng&)>
      make;
};

std::vector<SuiteCase> op_cases() {
  std::vector<SuiteCase> cases;
  auto dims = [](Rng& rng) { return 1 + rng.below(4); };

  cases.push_back({"matmul", [dims](Rng& rng) {
    const std::size_t m = dims(rng), k = dims(rng), n = dims(rng);
    Tensor a = random_tensor(rng, {m, k}, -1.0, 1.0, true);
    Tensor b = random_tensor(rng, {k, n}, -1.0, 1.0, true);
    Tensor w = random_tensor(rng, {m, n}, -1.0, 1.0, false);
    return std::make_pair(
        std::function<Tensor()>(
            [a, b, w]() { return weighted_mean(matmul(a, b), w); }),
        std::vector<Tensor>{a, b});
  }});
  cases.push_back({"add", [dims](Rng& rng) {
    const std::size_t m = dims(rng), n = dims(rng);
    Tensor a = random_tensor(rng, {m, n}, -1.0, 1.0, true);
    Tensor row = random_tensor(rng, {1, n}, -1.0, 1.0, true);
    Tensor w = random_tensor(rng, {m, n}, -1.0, 1.0, false);
    return std::make_pair(
        std::function<Tensor()>(
            [a, row, w]() { return weighted_mean(add(a, row), w); }),
        std::vector<Tensor>{a, row});
  }});
  cases.push_back({"sub", [dims](Rng& rng) {
    const std::size_t m = dims(rng), n = dims(rng);
    Tensor a = random_tensor(rng, {m, n}, -1.0, 1.0, true);
    Tensor b = random_tensor(rng, {m, n}, -1.0, 1.0, true);
    Tensor w = random_tensor(rng, {m, n}, -1.0, 1.0, false);
    return std::make_pair(
        std::function<Tensor()>(
            [a, b, w]() { return weighted_mean(sub(a, b), w); }),
        std::vector<Tensor>{a, b});
  }});
  cases.push_back({"mul", [dims](Rng& rng) {
    const std::size_t m = dims(rng), n = dims(rng);
    Tensor a = random_tensor(rng, {m, n}, -1.0, 1.0, true);
    Tensor b = random_tensor(rng, {m, n}, -1.0, 1.0, true);
    Tensor w = random_tensor(rng, {m, n}, -1.0, 1.0, false);
    return std::make_pair(
        std::function<Tensor()>(
            [a, b, w]() { return weighted_mean(mul(a, b), w); }),
        std::vector<Tensor>{a, b});
  }});
  cases.push_back({"div", [dims](Rng& rng) {
    const std::size_t m = dims(rng), n = dims(rng);
    Tensor a = random_tensor(rng, {m, n}, -1.0, 1.0, true);
    Tensor b = random_tensor(rng, {m, n}, 0.5, 1.5, true);
    Tensor w = random_tensor(rng, {m, n}, -1.0, 1.0, false);
    return std::make_pair(
        std::function<Tensor()>(
            [a, b, w]() { return weighted_mean(div(a, b), w); }),
        std::vector<Tensor>{a, b});
  }});
  cases.push_back({"relu", [dims](Rng& rng) {
    const std::size_t m = dims(rng), n = dims(rng);
    Tensor x = random_signed_away_from_zero(rng, {m, n}, true);
    Tensor w = random_tensor(rng, {m, n}, -1.0, 1.0, false);
    return std::make_pair(
        std::function<Tensor()>([x, w]() { return weighted_mean(relu(x), w); }),
        std::vector<Tensor>{x});
  }});
  cases.push_back({"exp", [dims](Rng& rng) {
    const std::size_t m = dims(rng), n = dims(rng);
    Tensor x = random_tensor(rng, {m, n}, -1.0, 1.0, true);
    Tensor w = random_tensor(rng, {m, n}, -1.0, 1.0, false);
    return std::make_pair(
        std::function<Tensor()>([x, w]() { return weighted_mean(exp(x), w); }),
        std::vector<Tensor>{x});
  }});
  cases.push_back({"log", [dims](Rng& rng) {
    const std::size_t m = dims(rng), n = dims(rng);
    Tensor x = random_tensor(rng, {m, n}, 0.2, 2.0, true);
    Tensor w = random_tensor(rng, {m, n}, -1.0, 1.0, false);
    return std::make_pair(
        std::function<Tensor()>([x, w]() { return weighted_mean(log(x), w); }),
        std::vector<Tensor>{x});
  }});
  cases.push_back({"neg", [dims](Rng& rng) {
    const std::size_t m = dims(rng), n = dims(rng);
    Tensor x = random_tensor(rng, {m, n}, -1.0, 1.0, true);
    Tensor w = random_tensor(rng, {m, n}, -1.0, 1.0, false);
    return std::make_pair(
        std::function<Tensor()>([x, w]() { return weighted_mean(neg(x), w); }),
        std::vector<Tensor>{x});
  }});
  cases.push_back({"sum", [dims](Rng& rng) {
    const std::size_t m = dims(rng), n = dims(rng);
    Tensor x = random_tensor(rng, {m, n}, -1.0, 1.0, true);
    return std::make_pair(std::function<Tensor()>([x]() { return sum(x); }),
                          std::vector<Tensor>{x});
  }});
  cases.push_back({"mean", [dims](Rng& rng) {
    const std::size_t m = dims(rng), n = dims(rng);
    Tensor x = random_tensor(rng, {m, n}, -1.0, 1.0, true);
    return std::make_pair(std::function<Tensor()>([x]() { return mean(x); }),
                          std::vector<Tensor>{x});
  }});
  cases.push_back({"transpose", [dims](Rng& rng) {
    const std::size_t m = dims(rng), n = dims(rng);
    Tensor x = random_tensor(rng, {m, n}, -1.0, 1.0, true);
    Tensor w = random_tensor(rng, {n, m}, -1.0, 1.0, false);
    return std::make_pair(
        std::function<Tensor()>(
            [x, w]() { return weighted_mean(transpose(x), w); }),
        std::vector<Tensor>{x});
  }});
  cases.push_back({"concat_rows", [dims](Rng& rng) {
    const std::size_t n = dims(rng);
    const std::size_t m1 = dims(rng), m2 = dims(rng);
    Tensor a = random_tensor(rng, {m1, n}, -1.0, 1.0, true);
    Tensor b = random_tensor(rng, {m2, n}, -1.0, 1.0, true);
    Tensor w = random_tensor(rng, {m1 + m2, n}, -1.0, 1.0, false);
    return std::make_pair(
        std::function<Tensor()>([a, b, w]() {
          return weighted_mean(concat_rows({a, b}), w);
        }),
        std::vector<Tensor>{a, b});
  }});
  cases.push_back({"row_softmax", [dims](Rng& rng) {
    const std::size_t m = dims(rng), n = 2 + rng.below(3);
    Tensor x = random_tensor(rng, {m, n}, -2.0, 2.0, true);
    Tensor w = random_tensor(rng, {m, n}, -1.0, 1.0, false);
    return std::make_pair(
        std::function<Tensor()>(
            [x, w]() { return weighted_mean(row_softmax(x), w); }),
        std::vector<Tensor>{x});
  }});
  cases.push_back({"row_log_softmax", [dims](Rng& rng) {
    const std::size_t m = dims(rng), n = 2 + rng.below(3);
    Tensor x = random_tensor(rng, {m, n}, -2.0, 2.0, true);
    Tensor w = random_tensor(rng, {m, n}, -1.0, 1.0, false);
    return std::make_pair(
        std::function<Tensor()>(
            [x, w]() { return weighted_mean(row_log_softmax(x), w); }),
        std::vector<Tensor>{x});
  }});
  cases.push_back({"l2_normalize", [dims](Rng& rng) {
    const std::size_t m = dims(rng), n = 2 + rng.below(3);
    Tensor x = random_signed_away_from_zero(rng, {m, n}, true);
    Tensor w = random_tensor(rng, {m, n}, -1.0, 1.0, false);
    return std::make_pair(
        std::function<Tensor()>(
            [x, w]() { return weighted_mean(l2_normalize(x, 1), w); }),
        std::vector<Tensor>{x});
  }});
  cases.push_back({"pick_rows", [dims](Rng& rng) {
    const std::size_t m = 1 + rng.below(4), n = 2 + rng.below(3);
    Tensor x = random_tensor(rng, {m, n}, -1.0, 1.0, true);
    std::vector<std::size_t> indices(m);
    for (auto& index : indices) index = rng.below(n);
    return std::make_pair(
        std::function<Tensor()>(
            [x, indices]() { return mean(pick_rows(x, indices)); }),
        std::vector<Tensor>{x});
  }});
  cases.push_back({"clamp_min", [dims](Rng& rng) {
    const std::size_t m = dims(rng), n = dims(rng);
    // Values at least 0.05 away from the clamp floor on either side.
    Tensor x = random_signed_away_from_zero(rng, {m, n}, true);
    Tensor w = random_tensor(rng, {m, n}, -1.0, 1.0, false);
    return std::make_pair(
        std::function<Tensor()>(
            [x, w]() { return weighted_mean(clamp_min(x, 0.0), w); }),
        std::vector<Tensor>{x});
  }});
  cases.push_back({"encode", [](Rng& rng) {
    NetworkSpec spec;
    spec.input_dim = 3 + rng.below(3);
    spec.layer_widths = {3 + rng.below(3), 2 + rng.below(3)};
    spec.normalize_output = true;
    for (int attempt = 0; attempt < 200; ++attempt) {
      Parameters params = init_parameters(spec, rng.next_u64());
      const std::size_t batch = 2 + rng.below(3);
      Tensor x = random_tensor(rng, {batch, spec.input_dim}, -1.0, 1.0, false);
      SmoothnessProbe probe;
      probe_network(params, spec, x, &probe);
      if (!probe.ok()) continue;
      Tensor w =
          random_tensor(rng, {batch, spec.output_dim()}, -1.0, 1.0, false);
      return std::make_pair(
          std::function<Tensor()>([params, spec, x, w]() {
            return weighted_mean(encode(params, spec, x), w);
          }),
          params.trainable());
    }
    throw StateError("gradient suite: no smooth encode configuration found");
  }});
  return cases;
}

std::vector<SuiteCase> loss_cases() {
  std::vector<SuiteCase> cases;
  auto preset_case = [](const std::string& name, bool force_ema) {
    return [name, force_ema](Rng& rng) {
      NetworkSpec enc;
      enc.input_dim = 4;
      enc.layer_widths = {5, 4};
      enc.normalize_output = true;
      ObjectiveConfig cfg = preset(name, enc.output_dim());
      if (force_ema) cfg.target_mode = TargetMode::ema;
      const std::size_t batch = 3;
      for (int attempt = 0; attempt < 200; ++attempt) {
        ModelParams model = init_model(enc, cfg, rng.next_u64());
        Tensor v1 =
            random_tensor(rng, {batch, enc.input_dim}, 0.0, 1.0, false);
        Tensor v2 =
            random_tensor(rng, {batch, enc.input_dim}, 0.0, 1.0, false);
        if (!model_smooth_at(model, cfg, enc, v1, v2)) continue;
        return std::make_pair(
            std::function<Tensor()>([model, cfg, v1, v2]() {
              return relic_loss(v1, v2, model, cfg).total;
            }),
            model.trainable());
      }
      throw StateError("gradient suite: no smooth " + name +
                       " configuration found");
    };
  };
  cases.push_back({"loss.simclr", preset_case("simclr", false)});
  cases.push_back({"loss.relic", preset_case("relic", false)});
  cases.push_back({"loss.relic_ema", preset_case("relic", true)});
  cases.push_back({"loss.amdim_style", preset_case("amdim_style", false)});
  cases.push_back({"loss.byol_style", preset_case("byol_style", false)});
  cases.push_back({"loss.euclidean", [](Rng& rng) {
    NetworkSpec enc;
    enc.input_dim = 4;
    enc.layer_widths = {5, 3};
    enc.normalize_output = false;
    const std::size_t batch = 3;
    for (int attempt = 0; attempt < 200; ++attempt) {
      Parameters params = init_parameters(enc, rng.next_u64());
      Tensor v1 = random_tensor(rng, {batch, enc.input_dim}, 0.0, 1.0, false);
      Tensor v2 = random_tensor(rng, {batch, enc.input_dim}, 0.0, 1.0, false);
      SmoothnessProbe probe;
      probe_network(params, enc, v1, &probe);
      probe_network(params, enc, v2, &probe);
      if (!probe.ok()) continue;
      return std::make_pair(
          std::function<Tensor()>([params, enc, v1, v2]() {
            return euclidean_objective(v1, v2, params, enc, 0.5);
          }),
          params.trainable());
    }
    throw StateError("gradient suite: no smooth euclidean configuration found");
  }});
  return cases;
}

}  // namespace

GradientSuiteReport gradient_suite(std::uint64_t seed,
                                   std::size_t configs_per_case,
                                   std::ostream* console) {
  std::vector<SuiteCase> cases = op_cases();
  for (auto& c : loss_cases()) cases.push_back(std::move(c));

  GradientSuiteReport report;
  report.all_pass = true;
  Rng rng(seed);
  for (const auto& suite_case : cases) {
    GradientCase entry;
    entry.name = suite_case.name;
    for (std::size_t i = 0; i < configs_per_case; ++i) {
      auto [loss_fn, params] = suite_case.make(rng);
      const GradCheckResult result = check_gradients(loss_fn, params);
      entry.max_rel_error = std::max(entry.max_rel_error, result.max_error);
    }
    entry.pass = entry.max_rel_error <= 1e-4;
    report.max_rel_error = std::max(report.max_rel_error, entry.max_rel_error);
    report.all_pass = report.all_pass && entry.pass;
    if (console) {
      *console << "  " << entry.name << ": max rel err "
               << format_double(entry.max_rel_error)
               << (entry.pass ? " PASS" : " FAIL") << '\n';
    }
    report.cases.push_back(std::move(entry));
  }
  return report;
}

VerifyOutcome verify_gradient_suite(std::uint64_t seed,
                                    std::size_t configs_per_case,
                                    std::ostream* console) {
  const GradientSuiteReport report =
      gradient_suite(seed, configs_per_case, console);
  VerifyOutcome outcome;
  outcome.ok = report.all_pass;
  std::ostringstream summary;
  summary << "gradient-suite: " << report.cases.size()
          << " cases, max rel err " << format_double(report.max_rel_error)
          << (report.all_pass ? " (all <= 1e-4)" : " (FAILURES)");
  outcome.summary = summary.str();
  if (console) *console << outcome.summary << '\n';
  return outcome;
}

}  // namespace relic
