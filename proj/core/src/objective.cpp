#include "relic/objective.hpp"

#include <algorithm>
#include <cmath>

#include "relic/errors.hpp"

namespace relic {

std::string to_string(Regularizer r) {
  switch (r) {
    case Regularizer::none: return "none";
    case Regularizer::kl_symmetric: return "kl_symmetric";
    case Regularizer::euclidean: return "euclidean";
    case Regularizer::byol_l2: return "byol_l2";
  }
  return "none";
}

std::string to_string(TargetMode m) {
  return m == TargetMode::shared ? "shared" : "ema";
}

void ObjectiveConfig::validate() const {
  if (tau <= 0.0) throw ConfigError("objective: tau must be positive");
  if (alpha < 0.0) throw ConfigError("objective: alpha must be nonnegative");
  if (!critic_identity) critic.validate();
  if (predictor_on_online) predictor.validate();
  if (!contrastive_enabled && regularizer == Regularizer::none) {
    throw ConfigError("objective: no contrastive term and no regularizer");
  }
}

ObjectiveConfig preset(const std::string& name, std::size_t embed_dim) {
  if (embed_dim == 0) throw ConfigError("preset: embed_dim must be positive");
  const std::size_t hidden = embed_dim;
  const std::size_t out = std::max<std::size_t>(embed_dim / 2, 4);

  ObjectiveConfig cfg;
  cfg.critic.input_dim = embed_dim;
  cfg.critic.layer_widths = {hidden, out};
  cfg.critic.normalize_output = true;

  if (name == "simclr") {
    cfg.alpha = 0.0;
    cfg.regularizer = Regularizer::none;
    cfg.target_mode = TargetMode::shared;
  } else if (name == "relic") {
    cfg.alpha = 1.0;
    cfg.regularizer = Regularizer::kl_symmetric;
    cfg.target_mode = TargetMode::shared;
  } else if (name == "amdim_style") {
    cfg.critic_identity = true;
    cfg.alpha = 0.0;
    cfg.regularizer = Regularizer::none;
    cfg.target_mode = TargetMode::shared;
  } else if (name == "byol_style") {
    cfg.alpha = 0.0;
    cfg.regularizer = Regularizer::byol_l2;
    cfg.target_mode = TargetMode::ema;
    cfg.contrastive_enabled = false;
    cfg.predictor_on_online = true;
    cfg.predictor.input_dim = out;
    cfg.predictor.layer_widths = {out};
    cfg.predictor.normalize_output = cfg.critic.normalize_output;
  } else {
    throw ConfigError("unknown preset \"" + name + "\"");
  }
  cfg.validate();
  return cfg;
}

std::vector<Tensor> ModelParams::trainable() const {
  std::vector<Tensor> out = encoder.trainable();
  for (const Tensor& t : critic.trainable()) out.push_back(t);
  for (const Tensor& t : predictor.trainable()) out.push_back(t);
  return out;
}

ModelParams init_model(const NetworkSpec& encoder_spec,
                       const ObjectiveConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  encoder_spec.validate();
  if (!cfg.critic_identity && cfg.critic.input_dim != encoder_spec.output_dim()) {
    throw ConfigError("critic input_dim " + std::to_string(cfg.critic.input_dim) +
                      " does not match encoder output " +
                      std::to_string(encoder_spec.output_dim()));
  }
  Rng master(seed);
  const std::uint64_t encoder_seed = master.next_u64();
  const std::uint64_t critic_seed = master.next_u64();
  const std::uint64_t predictor_seed = master.next_u64();

  ModelParams model;
  model.encoder_spec = encoder_spec;
  model.encoder = init_parameters(encoder_spec, encoder_seed);
  if (!cfg.critic_identity) {
    model.critic = init_parameters(cfg.critic, critic_seed);
  }
  if (cfg.predictor_on_online) {
    model.predictor = init_parameters(cfg.predictor, predictor_seed);
    model.use_predictor = true;
  }
  if (cfg.target_mode == TargetMode::ema) {
    model.target_encoder = model.encoder.clone(/*requires_grad=*/false);
    if (!cfg.critic_identity) {
      model.target_critic = model.critic.clone(/*requires_grad=*/false);
    }
    model.use_target = true;
  }
  return model;
}

Tensor critic_apply(const ObjectiveConfig& cfg, const Parameters& critic_params,
                    const Tensor& embeddings) {
  if (cfg.critic_identity) return embeddings;
  return encode(critic_params, cfg.critic, embeddings);
}

ProxyDistribution proxy_distribution(const Tensor& anchors,
                                     const Tensor& candidates,
                                     const ObjectiveConfig& cfg,
                                     const Parameters& critic_anchor,
                                     const Parameters& critic_candidate) {
  if (cfg.tau <= 0.0) throw ConfigError("proxy_distribution: tau must be positive");
  if (anchors.rank() != 2 || candidates.rank() != 2 ||
      anchors.cols() != candidates.cols()) {
    throw ShapeError("proxy_distribution: embedding shapes " +
                     shape_string(anchors.shape()) + " and " +
                     shape_string(candidates.shape()) + " do not align");
  }
  const Tensor ga = critic_apply(cfg, critic_anchor, anchors);
  const Tensor gc = critic_apply(cfg, critic_candidate, candidates);
  const Tensor scores = mul(matmul(ga, transpose(gc)),
                            Tensor::scalar(1.0 / cfg.tau));
  ProxyDistribution dist;
  dist.probs = row_softmax(scores);
  dist.log_probs = row_log_softmax(scores);
  return dist;
}

Tensor contrastive_term(const ProxyDistribution& dist,
                        const std::vector<std::size_t>& positives) {
  const Tensor picked = pick_rows(dist.log_probs, positives);
  // Floor in log space keeps each anchor's term inside [0, -log(floor)].
  return neg(mean(clamp_min(picked, std::log(kProbFloor))));
}

Tensor invariance_penalty(const std::vector<ProxyDistribution>& dists) {
  if (dists.empty()) throw ContractError("invariance_penalty: empty list");
  const auto& shape0 = dists[0].probs.shape();
  for (const auto& d : dists) {
    if (d.probs.shape() != shape0) {
      throw ContractError("invariance_penalty: distribution shapes differ, " +
                          shape_string(shape0) + " vs " +
                          shape_string(d.probs.shape()));
    }
  }
  if (dists.size() < 2) return Tensor::scalar(0.0);

  const double rows = static_cast<double>(shape0[0]);
  Tensor acc = Tensor::scalar(0.0);
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < dists.size(); ++i) {
    for (std::size_t j = i + 1; j < dists.size(); ++j) {
      const Tensor& p = dists[i].probs;
      const Tensor& q = dists[j].probs;
      const Tensor logp = log(clamp_min(p, kProbFloor));
      const Tensor logq = log(clamp_min(q, kProbFloor));
      const Tensor diff = sub(logp, logq);
      // Row-mean of KL(p||q) + KL(q||p); each KL sums over candidates.
      const Tensor kl_pq = sum(mul(p, diff));
      const Tensor kl_qp = neg(sum(mul(q, diff)));
      acc = add(acc, mul(add(kl_pq, kl_qp), Tensor::scalar(0.5 / rows)));
      ++pairs;
    }
  }
  return mul(acc, Tensor::scalar(1.0 / static_cast<double>(pairs)));
}

namespace {

std::vector<std::size_t> diagonal_indices(std::size_t n) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  return idx;
}

// Mean over batch rows of the squared distance between paired rows.
Tensor mean_row_sq_distance(const Tensor& a, const Tensor& b) {
  const Tensor diff = sub(a, b);
  return mul(sum(mul(diff, diff)),
             Tensor::scalar(1.0 / static_cast<double>(a.rows())));
}

}  // namespace

LossParts relic_loss(const Tensor& view1, const Tensor& view2,
                     const ModelParams& model, const ObjectiveConfig& cfg) {
  cfg.validate();
  if (view1.rank() != 2 || view2.rank() != 2 ||
      view1.shape() != view2.shape()) {
    throw ShapeError("relic_loss: views " + shape_string(view1.shape()) +
                     " and " + shape_string(view2.shape()) + " do not align");
  }
  if (view1.rows() < 2) {
    throw ContractError("relic_loss: batch must have at least 2 rows");
  }
  if (cfg.contrast_m != 0 && cfg.contrast_m != view1.rows()) {
    throw ConfigError("relic_loss: contrast_m must be 0 (full batch) or equal "
                      "to the batch size");
  }

  LossParts parts;
  parts.contrastive = Tensor::scalar(0.0);
  parts.penalty = Tensor::scalar(0.0);

  if (!cfg.contrastive_enabled) {
    // Regularizer-only branch (byol_style): predictor on the online side,
    // stop-gradient target on the other.
    const Tensor z1 = encode(model.encoder, model.encoder_spec, view1);
    const Tensor z2 = encode(model.encoder, model.encoder_spec, view2);
    const Parameters& target_enc =
        model.use_target ? model.target_encoder : model.encoder;
    const Parameters& target_cri =
        model.use_target ? model.target_critic : model.critic;
    const Tensor t1 = critic_apply(cfg, target_cri,
                                   encode(target_enc, model.encoder_spec, view1));
    const Tensor t2 = critic_apply(cfg, target_cri,
                                   encode(target_enc, model.encoder_spec, view2));
    Tensor p1 = critic_apply(cfg, model.critic, z1);
    Tensor p2 = critic_apply(cfg, model.critic, z2);
    if (model.use_predictor) {
      p1 = encode(model.predictor, cfg.predictor, p1);
      p2 = encode(model.predictor, cfg.predictor, p2);
    }
    parts.penalty =
        add(mean_row_sq_distance(p1, t2), mean_row_sq_distance(p2, t1));
    parts.total = parts.penalty;
    return parts;
  }

  // Contrastive branch. Anchors always come from the online encoder f;
  // candidates come from h (= f when shared, EMA copy otherwise).
  const Tensor z1 = encode(model.encoder, model.encoder_spec, view1);
  const Tensor z2 = encode(model.encoder, model.encoder_spec, view2);
  Tensor c1 = z1, c2 = z2;
  const Parameters* candidate_critic = &model.critic;
  if (model.use_target) {
    c1 = encode(model.target_encoder, model.encoder_spec, view1);
    c2 = encode(model.target_encoder, model.encoder_spec, view2);
    candidate_critic = &model.target_critic;
  }
  const ProxyDistribution d12 =
      proxy_distribution(z1, c2, cfg, model.critic, *candidate_critic);
  const ProxyDistribution d21 =
      proxy_distribution(z2, c1, cfg, model.critic, *candidate_critic);

  const auto positives = diagonal_indices(view1.rows());
  parts.contrastive =
      add(contrastive_term(d12, positives), contrastive_term(d21, positives));
  parts.total = parts.contrastive;

  if (cfg.regularizer == Regularizer::kl_symmetric) {
    parts.penalty = invariance_penalty({d12, d21});
    if (cfg.alpha > 0.0) {
      parts.total = add(parts.contrastive,
                        mul(parts.penalty, Tensor::scalar(cfg.alpha)));
    }
  } else if (cfg.regularizer == Regularizer::euclidean) {
    parts.penalty = mean_row_sq_distance(z1, z2);
    if (cfg.alpha > 0.0) {
      parts.total = add(parts.contrastive,
                        mul(parts.penalty, Tensor::scalar(cfg.alpha)));
    }
  }
  return parts;
}

Tensor euclidean_objective(const Tensor& view1, const Tensor& view2,
                           const Parameters& encoder,
                           const NetworkSpec& encoder_spec, double rho_weight) {
  if (view1.rank() != 2 || view1.shape() != view2.shape()) {
    throw ShapeError("euclidean_objective: views do not align");
  }
  const std::size_t n = view1.rows();
  if (n < 2) {
    throw ContractError("euclidean_objective: need at least 2 rows");
  }
  const Tensor z1 = encode(encoder, encoder_spec, view1);
  const Tensor z2 = encode(encoder, encoder_spec, view2);

  // Identity-critic scores s_im = <z1_i, z2_m>; gaps v_im = s_im - s_ii.
  const Tensor scores = matmul(z1, transpose(z2));
  const Tensor pos = pick_rows(scores, diagonal_indices(n));  // {n}
  // (scores^T - pos)_{m,i} = s_im - s_ii via row-vector broadcast.
  Tensor gaps_t = sub(transpose(scores), pos);
  // Mask the m = i entry so each anchor sees n-1 negatives.
  std::vector<double> mask(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) mask[i * n + i] = -1e30;
  gaps_t = add(gaps_t, Tensor::from(std::move(mask), {n, n}));

  // log(1 + sum_m exp(v_im)) = -log_softmax([0 | v_i])[0], computed stably.
  const Tensor padded = transpose(concat_rows({Tensor::zeros({1, n}), gaps_t}));
  const Tensor lsm = row_log_softmax(padded);
  const Tensor ell = neg(pick_rows(lsm, std::vector<std::size_t>(n, 0)));

  return add(mean(ell),
             mul(mean_row_sq_distance(z1, z2), Tensor::scalar(rho_weight)));
}

}  // namespace relic
