#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "relic/rng.hpp"
#include "relic/tensor.hpp"

namespace relic {

// MLP shape: input_dim -> layer_widths[0] -> ... -> layer_widths.back(),
// relu between layers, none after the last. normalize_output l2-normalizes
// each output row.
struct NetworkSpec {
  std::size_t input_dim = 1;
  std::vector<std::size_t> layer_widths;
  bool normalize_output = false;

  std::size_t output_dim() const { return layer_widths.back(); }
  void validate() const;  // throws ConfigError
};

// Weight/bias tensors for one network. step counts optimizer updates applied
// to this parameter set; rng_state records the init stream for checkpoints.
struct Parameters {
  std::vector<Tensor> weights;  // [fan_in, width] per layer
  std::vector<Tensor> biases;   // [1, width]
  std::uint64_t step = 0;
  std::array<std::uint64_t, 4> rng_state{};

  // Trainable tensors in a fixed order: w0, b0, w1, b1, ...
  std::vector<Tensor> trainable() const;
  Parameters clone(bool requires_grad) const;  // deep copy of values
};

// He-uniform fan-in init (U(-sqrt(6/fan_in), +sqrt(6/fan_in))), zero biases.
Parameters init_parameters(const NetworkSpec& spec, std::uint64_t seed,
                           bool requires_grad = true);

// Deterministic forward pass; differentiable when recorded on a tape.
Tensor encode(const Parameters& params, const NetworkSpec& spec,
              const Tensor& batch);

struct OptimizerConfig {
  double base_lr = 0.3;
  std::size_t batch_size = 256;
  std::size_t warmup_steps = 100;
  std::size_t total_steps = 2000;
  double weight_decay = 1.5e-6;
  double momentum = 0.9;
  double lars_eta = 0.001;
  bool exclude_bias_and_norm = true;

  void validate() const;  // throws ConfigError
};

// Momentum buffers aligned with Parameters::trainable() order.
struct OptimizerState {
  std::vector<std::vector<double>> momentum;
};

// One LARS update from the adjoints currently stored on params' tensors.
// Trust ratio eta*|w| / (|grad| + wd*|w|), clamped to [0, 10], falling back
// to 1 when either norm is zero; biases take plain momentum SGD when
// excluded. Throws NumericError carrying the layer index on non-finite
// gradients, leaving parameters untouched.
void lars_step(Parameters& params, OptimizerState& state,
               const OptimizerConfig& cfg, double lr);

// Linear warmup to peak = base_lr * batch_size / 256, then cosine decay to 0
// at total_steps.
double cosine_schedule(std::size_t step, const OptimizerConfig& cfg);

// tau(k) = 1 - (1 - tau_base) * (cos(pi k / K) + 1) / 2; k=0 gives tau_base,
// k=K gives 1. target <- tau * target + (1 - tau) * online, elementwise.
double ema_tau(std::size_t k, std::size_t K, double tau_base);
void ema_update(const Parameters& online, Parameters& target, std::size_t k,
                std::size_t K, double tau_base);

}  // namespace relic
