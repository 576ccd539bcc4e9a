#include "relic/network.hpp"

#include <cmath>
#include <numbers>

#include "relic/errors.hpp"

namespace relic {

void NetworkSpec::validate() const {
  if (input_dim == 0) throw ConfigError("network: input_dim must be positive");
  if (layer_widths.empty()) throw ConfigError("network: needs at least one layer");
  for (std::size_t w : layer_widths) {
    if (w == 0) throw ConfigError("network: zero layer width");
  }
}

std::vector<Tensor> Parameters::trainable() const {
  std::vector<Tensor> out;
  out.reserve(weights.size() * 2);
  for (std::size_t l = 0; l < weights.size(); ++l) {
    out.push_back(weights[l]);
    out.push_back(biases[l]);
  }
  return out;
}

Parameters Parameters::clone(bool requires_grad) const {
  Parameters copy;
  copy.step = step;
  copy.rng_state = rng_state;
  for (const Tensor& w : weights) {
    copy.weights.push_back(Tensor::from(w.values(), w.shape(), requires_grad));
  }
  for (const Tensor& b : biases) {
    copy.biases.push_back(Tensor::from(b.values(), b.shape(), requires_grad));
  }
  return copy;
}

Parameters init_parameters(const NetworkSpec& spec, std::uint64_t seed,
                           bool requires_grad) {
  spec.validate();
  Rng rng(seed);
  Parameters params;
  std::size_t fan_in = spec.input_dim;
  for (std::size_t width : spec.layer_widths) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
    std::vector<double> w(fan_in * width);
    for (double& v : w) v = rng.uniform(-limit, limit);
    params.weights.push_back(
        Tensor::from(std::move(w), {fan_in, width}, requires_grad));
    params.biases.push_back(Tensor::zeros({1, width}, requires_grad));
    fan_in = width;
  }
  params.rng_state = rng.state();
  return params;
}

Tensor encode(const Parameters& params, const NetworkSpec& spec,
              const Tensor& batch) {
  if (batch.rank() != 2 || batch.cols() != spec.input_dim) {
    throw ShapeError("encode: batch " + shape_string(batch.shape()) +
                     " does not match input_dim " +
                     std::to_string(spec.input_dim));
  }
  if (params.weights.size() != spec.layer_widths.size()) {
    throw ShapeError("encode: parameter count does not match spec depth");
  }
  Tensor x = batch;
  for (std::size_t l = 0; l < params.weights.size(); ++l) {
    x = add(matmul(x, params.weights[l]), params.biases[l]);
    if (l + 1 < params.weights.size()) x = relu(x);
  }
  if (spec.normalize_output) x = l2_normalize(x, 1);
  return x;
}

void OptimizerConfig::validate() const {
  if (base_lr <= 0.0) throw ConfigError("optimizer: base_lr must be positive");
  if (batch_size == 0) throw ConfigError("optimizer: batch_size must be positive");
  if (total_steps == 0) throw ConfigError("optimizer: total_steps must be positive");
  if (warmup_steps > total_steps) {
    throw ConfigError("optimizer: warmup_steps exceeds total_steps");
  }
  if (momentum < 0.0 || momentum >= 1.0) {
    throw ConfigError("optimizer: momentum outside [0, 1)");
  }
}

namespace {

double l2_norm(const std::vector<double>& v) {
  double sq = 0.0;
  for (double x : v) sq += x * x;
  return std::sqrt(sq);
}

}  // namespace

void lars_step(Parameters& params, OptimizerState& state,
               const OptimizerConfig& cfg, double lr) {
  const std::vector<Tensor> tensors = params.trainable();
  if (state.momentum.empty()) state.momentum.resize(tensors.size());

  // Validate every gradient before touching any parameter so a non-finite
  // gradient aborts the whole step atomically.
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    for (double g : tensors[i].adjoint()) {
      if (!std::isfinite(g)) {
        throw NumericError("non-finite gradient in layer " +
                               std::to_string(i / 2) +
                               (i % 2 == 0 ? " weight" : " bias"),
                           static_cast<std::ptrdiff_t>(i / 2));
      }
    }
  }

  for (std::size_t i = 0; i < tensors.size(); ++i) {
    Tensor t = tensors[i];
    const std::vector<double>& grad = t.adjoint();
    std::vector<double>& value = t.mutable_values();
    std::vector<double>& buf = state.momentum[i];
    if (buf.empty()) buf.assign(value.size(), 0.0);

    const bool is_bias = (i % 2 == 1);
    const bool excluded = is_bias && cfg.exclude_bias_and_norm;

    if (excluded) {
      // Plain momentum SGD, no weight decay, no trust scaling.
      for (std::size_t k = 0; k < value.size(); ++k) {
        buf[k] = cfg.momentum * buf[k] + grad[k];
        value[k] -= lr * buf[k];
      }
      continue;
    }

    const double w_norm = l2_norm(value);
    const double g_norm = l2_norm(grad);
    double trust = 1.0;  // zero norms fall back to the unscaled update
    const double denom = g_norm + cfg.weight_decay * w_norm;
    if (w_norm > 0.0 && denom > 0.0) {
      trust = cfg.lars_eta * w_norm / denom;
      trust = std::min(std::max(trust, 0.0), 10.0);
    }
    for (std::size_t k = 0; k < value.size(); ++k) {
      buf[k] = cfg.momentum * buf[k] + (grad[k] + cfg.weight_decay * value[k]);
      value[k] -= lr * trust * buf[k];
    }
  }
  params.step += 1;
}

double cosine_schedule(std::size_t step, const OptimizerConfig& cfg) {
  if (step > cfg.total_steps) {
    throw ContractError("cosine_schedule: step " + std::to_string(step) +
                        " beyond total_steps " + std::to_string(cfg.total_steps));
  }
  const double peak =
      cfg.base_lr * static_cast<double>(cfg.batch_size) / 256.0;
  if (step < cfg.warmup_steps) {
    return peak * static_cast<double>(step) /
           static_cast<double>(cfg.warmup_steps);
  }
  if (cfg.total_steps == cfg.warmup_steps) return peak;
  const double progress =
      static_cast<double>(step - cfg.warmup_steps) /
      static_cast<double>(cfg.total_steps - cfg.warmup_steps);
  return peak * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

double ema_tau(std::size_t k, std::size_t K, double tau_base) {
  if (K == 0) throw ContractError("ema_tau: K must be positive");
  if (k > K) throw ContractError("ema_tau: k beyond K");
  const double cosine =
      std::cos(std::numbers::pi * static_cast<double>(k) /
               static_cast<double>(K));
  return 1.0 - (1.0 - tau_base) * (cosine + 1.0) / 2.0;
}

void ema_update(const Parameters& online, Parameters& target, std::size_t k,
                std::size_t K, double tau_base) {
  const double tau = ema_tau(k, K, tau_base);
  const auto online_tensors = online.trainable();
  const auto target_tensors = target.trainable();
  if (online_tensors.size() != target_tensors.size()) {
    throw ShapeError("ema_update: parameter counts differ");
  }
  for (std::size_t i = 0; i < online_tensors.size(); ++i) {
    Tensor t = target_tensors[i];
    const Tensor& o = online_tensors[i];
    if (t.shape() != o.shape()) {
      throw ShapeError("ema_update: shape mismatch " +
                       shape_string(t.shape()) + " vs " +
                       shape_string(o.shape()));
    }
    std::vector<double>& tv = t.mutable_values();
    const std::vector<double>& ov = o.values();
    for (std::size_t j = 0; j < tv.size(); ++j) {
      tv[j] = tau * tv[j] + (1.0 - tau) * ov[j];
    }
  }
}

}  // namespace relic
