#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "relic/network.hpp"
#include "relic/tensor.hpp"

namespace relic {

// Probabilities are floored at this value inside every log so divergences
// stay finite on empirical zeros; the floor is part of the loss definition
// and is reported alongside diagnostics.
inline constexpr double kProbFloor = 1e-12;

enum class Regularizer { none, kl_symmetric, euclidean, byol_l2 };
enum class TargetMode { shared, ema };

std::string to_string(Regularizer r);
std::string to_string(TargetMode m);

// One row of the design-choice table: critic shape, invariance penalty,
// regularizer kind and target-network mode.
struct ObjectiveConfig {
  double tau = 0.1;    // softmax temperature
  double alpha = 0.0;  // invariance penalty weight
  bool critic_identity = false;
  NetworkSpec critic;            // ignored when critic_identity
  NetworkSpec predictor;         // used only with predictor_on_online
  bool predictor_on_online = false;
  Regularizer regularizer = Regularizer::none;
  TargetMode target_mode = TargetMode::shared;
  std::size_t contrast_m = 0;  // 0 = use the full batch as contrast set
  bool contrastive_enabled = true;

  void validate() const;  // throws ConfigError
};

// simclr: critic MLP normalized, alpha 0, no regularizer, shared target.
// relic: critic MLP normalized, alpha 1, symmetric KL, shared target.
// amdim_style: identity critic, alpha 0.
// byol_style: predictor on the online branch, |g1(g2) - g2|^2 regularizer,
//             no contrastive term, EMA target with stop-gradient.
ObjectiveConfig preset(const std::string& name, std::size_t embed_dim);

// All parameter sets one objective can touch. Target copies exist only in
// EMA mode and never require gradients (stop-gradient through the target).
struct ModelParams {
  NetworkSpec encoder_spec;
  Parameters encoder;
  Parameters critic;          // empty when the critic is the identity
  Parameters predictor;       // byol-style only
  Parameters target_encoder;  // ema mode only
  Parameters target_critic;   // ema mode + MLP critic only
  bool use_target = false;
  bool use_predictor = false;

  std::vector<Tensor> trainable() const;
};

ModelParams init_model(const NetworkSpec& encoder_spec,
                       const ObjectiveConfig& cfg, std::uint64_t seed);

// Critic projection g(.) of encoder outputs (identity passthrough or MLP).
Tensor critic_apply(const ObjectiveConfig& cfg, const Parameters& critic_params,
                    const Tensor& embeddings);

// Row-stochastic p(candidate j | anchor i) with both linear and log forms on
// the tape; scores are critic inner products divided by tau.
struct ProxyDistribution {
  Tensor probs;      // N x M, rows sum to 1
  Tensor log_probs;  // stable log of the same rows
};

ProxyDistribution proxy_distribution(const Tensor& anchors,
                                     const Tensor& candidates,
                                     const ObjectiveConfig& cfg,
                                     const Parameters& critic_anchor,
                                     const Parameters& critic_candidate);

// Mean over rows of -log p[row, positives[row]], floored.
Tensor contrastive_term(const ProxyDistribution& dist,
                        const std::vector<std::size_t>& positives);

// Mean over unordered distribution pairs and rows of the symmetrized KL
// 0.5 * (KL(p||q) + KL(q||p)) with floored logs.
Tensor invariance_penalty(const std::vector<ProxyDistribution>& dists);

struct LossParts {
  Tensor total;
  Tensor contrastive;  // scalar 0 when the preset has no contrastive term
  Tensor penalty;      // invariance penalty or regularizer value
};

// Full objective on two augmented views of the same batch. The contrast set
// is the other view of every batch element with positives on the diagonal;
// the penalty compares the two anchor->candidate distributions (one per
// augmentation pair ordering).
LossParts relic_loss(const Tensor& view1, const Tensor& view2,
                     const ModelParams& model, const ObjectiveConfig& cfg);

// Logistic-loss variant with an explicit Euclidean invariance penalty:
// mean_i log(1 + sum_{m != i} exp(s_im - s_ii)) + rho * mean_i |z1_i - z2_i|^2
// with identity-critic scores s_im = <f(v1_i), f(v2_m)>.
Tensor euclidean_objective(const Tensor& view1, const Tensor& view2,
                           const Parameters& encoder,
                           const NetworkSpec& encoder_spec, double rho_weight);

}  // namespace relic
