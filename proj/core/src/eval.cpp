#include "relic/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <queue>
#include <sstream>

#include "relic/errors.hpp"
#include "relic/rng.hpp"

namespace relic {
namespace {

void require_rep_matrix(const Tensor& reps,
                        const std::vector<std::uint16_t>& labels,
                        const char* op) {
  if (reps.rank() != 2) {
    throw ContractError(std::string(op) + ": representations must be rank-2");
  }
  if (reps.rows() == 0 || reps.cols() == 0) {
    throw ContractError(std::string(op) + ": representations are empty");
  }
  if (labels.size() != reps.rows()) {
    std::ostringstream msg;
    msg << op << ": " << labels.size() << " labels for " << reps.rows()
        << " rows";
    throw ContractError(msg.str());
  }
}

// Indices of every row per present class id, ascending by id.
std::vector<std::vector<std::size_t>> group_by_class(
    const std::vector<std::uint16_t>& labels) {
  std::uint16_t max_label = 0;
  for (const auto label : labels) max_label = std::max(max_label, label);
  std::vector<std::vector<std::size_t>> groups(
      static_cast<std::size_t>(max_label) + 1);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    groups[labels[i]].push_back(i);
  }
  return groups;
}

double squared_row_distance(const std::vector<double>& values, std::size_t dim,
                            std::size_t i, std::size_t j) {
  double acc = 0.0;
  const double* a = values.data() + i * dim;
  const double* b = values.data() + j * dim;
  for (std::size_t k = 0; k < dim; ++k) {
    const double d = a[k] - b[k];
    acc += d * d;
  }
  return acc;
}

// --------------------------------------------------------------------------
// Linear probe internals
// --------------------------------------------------------------------------

struct ProbeSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
};

ProbeSplit make_split(std::size_t n, ProbeProtocol protocol,
                      std::uint64_t seed) {
  ProbeSplit split;
  if (protocol == ProbeProtocol::full_batch) {
    split.train.resize(n);
    std::iota(split.train.begin(), split.train.end(), std::size_t{0});
    split.val = split.train;
    split.test = split.train;
    return split;
  }
  if (n < 3) {
    throw ContractError("linear_probe: three_fold protocol needs >= 3 rows");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  for (std::size_t i = n - 1; i > 0; --i) {
    const std::size_t j = rng.below(i + 1);
    std::swap(order[i], order[j]);
  }
  const std::size_t n_train = (n + 2) / 3;
  const std::size_t n_val = (n + 1) / 3;
  split.train.assign(order.begin(), order.begin() + n_train);
  split.val.assign(order.begin() + n_train, order.begin() + n_train + n_val);
  split.test.assign(order.begin() + n_train + n_val, order.end());
  return split;
}

Tensor gather_rows(const Tensor& reps, const std::vector<std::size_t>& rows) {
  const std::size_t dim = reps.cols();
  std::vector<double> out;
  out.reserve(rows.size() * dim);
  const auto& values = reps.values();
  for (const auto r : rows) {
    out.insert(out.end(), values.begin() + r * dim,
               values.begin() + (r + 1) * dim);
  }
  return Tensor::from(std::move(out), {rows.size(), dim});
}

std::vector<std::size_t> gather_labels(const std::vector<std::uint16_t>& labels,
                                       const std::vector<std::size_t>& rows) {
  std::vector<std::size_t> out;
  out.reserve(rows.size());
  for (const auto r : rows) out.push_back(labels[r]);
  return out;
}

double raw_accuracy(const Tensor& x, const std::vector<std::size_t>& y,
                    const ProbeModel& model) {
  const std::size_t n = x.rows();
  const std::size_t dim = x.cols();
  const auto& values = x.values();
  std::size_t hits = 0;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t best = 0;
    double best_score = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < model.n_classes; ++c) {
      double score = model.b[c];
      for (std::size_t k = 0; k < dim; ++k) {
        score += values[i * dim + k] * model.w[k * model.n_classes + c];
      }
      if (score > best_score) {  // ties resolve to the lowest class id
        best_score = score;
        best = c;
      }
    }
    if (best == y[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(n);
}

// Full-batch gradient descent over the lr grid; returns the snapshot with
// the best accuracy on the selection set (earliest lr/epoch wins ties).
ProbeModel fit_grid(const Tensor& x_train, const std::vector<std::size_t>& y_train,
                    const Tensor& x_sel, const std::vector<std::size_t>& y_sel,
                    std::size_t n_classes, const ProbeConfig& cfg) {
  const std::size_t dim = x_train.cols();
  ProbeModel best;
  best.n_classes = n_classes;
  double best_sel = -1.0;

  for (const auto lr : cfg.lr_grid) {
    Tensor w = Tensor::zeros({dim, n_classes}, true);
    Tensor b = Tensor::zeros({1, n_classes}, true);
    std::vector<double> w_buf(dim * n_classes, 0.0);
    std::vector<double> b_buf(n_classes, 0.0);

    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
      Tape tape;
      Tensor loss;
      {
        Tape::Scope scope(tape);
        const Tensor logits = add(matmul(x_train, w), b);
        loss = neg(mean(pick_rows(row_log_softmax(logits), y_train)));
      }
      tape.backward(loss);

      const auto& w_grad = w.adjoint();
      auto& w_values = w.mutable_values();
      for (std::size_t i = 0; i < w_values.size(); ++i) {
        w_buf[i] = cfg.momentum * w_buf[i] + w_grad[i];
        w_values[i] -= lr * w_buf[i];
      }
      const auto& b_grad = b.adjoint();
      auto& b_values = b.mutable_values();
      for (std::size_t i = 0; i < b_values.size(); ++i) {
        b_buf[i] = cfg.momentum * b_buf[i] + b_grad[i];
        b_values[i] -= lr * b_buf[i];
      }

      ProbeModel current;
      current.w = w.values();
      current.b = b.values();
      current.n_classes = n_classes;
      const double sel_acc = raw_accuracy(x_sel, y_sel, current);
      if (sel_acc > best_sel) {
        best_sel = sel_acc;
        current.train_accuracy = sel_acc;
        current.best_lr = lr;
        current.best_epoch = epoch;
        best = std::move(current);
      }
    }
  }
  return best;
}

std::size_t count_classes(const std::vector<std::uint16_t>& labels,
                          const char* op) {
  std::uint16_t max_label = 0;
  bool multiclass = false;
  for (const auto label : labels) {
    if (label != labels.front()) multiclass = true;
    max_label = std::max(max_label, label);
  }
  if (!multiclass) {
    throw ContractError(std::string(op) + ": at least two classes required");
  }
  return static_cast<std::size_t>(max_label) + 1;
}

}  // namespace

void ProbeConfig::validate() const {
  if (epochs == 0) throw ConfigError("probe: epochs must be >= 1");
  if (lr_grid.empty()) throw ConfigError("probe: lr_grid must be nonempty");
  for (const auto lr : lr_grid) {
    if (!(lr > 0.0) || !std::isfinite(lr)) {
      throw ConfigError("probe: learning rates must be finite and positive");
    }
  }
  if (!(momentum >= 0.0 && momentum < 1.0)) {
    throw ConfigError("probe: momentum must lie in [0, 1)");
  }
}

ProbeResult linear_probe(const Tensor& reps,
                         const std::vector<std::uint16_t>& labels,
                         const ProbeConfig& cfg) {
  cfg.validate();
  require_rep_matrix(reps, labels, "linear_probe");
  const std::size_t n_classes = count_classes(labels, "linear_probe");

  const ProbeSplit split = make_split(reps.rows(), cfg.protocol, cfg.seed);
  const Tensor x_train = gather_rows(reps, split.train);
  const Tensor x_val = gather_rows(reps, split.val);
  const Tensor x_test = gather_rows(reps, split.test);
  const auto y_train = gather_labels(labels, split.train);
  const auto y_val = gather_labels(labels, split.val);
  const auto y_test = gather_labels(labels, split.test);

  const ProbeModel best = fit_grid(x_train, y_train, x_val, y_val, n_classes, cfg);

  ProbeResult result;
  result.accuracy = raw_accuracy(x_test, y_test, best);
  result.val_accuracy = best.train_accuracy;
  result.best_lr = best.best_lr;
  result.best_epoch = best.best_epoch;
  return result;
}

ProbeModel fit_probe(const Tensor& reps,
                     const std::vector<std::uint16_t>& labels,
                     const ProbeConfig& cfg) {
  cfg.validate();
  require_rep_matrix(reps, labels, "fit_probe");
  const std::size_t n_classes = count_classes(labels, "fit_probe");
  std::vector<std::size_t> y(labels.begin(), labels.end());
  return fit_grid(reps, y, reps, y, n_classes, cfg);
}

double probe_model_accuracy(const ProbeModel& model, const Tensor& reps,
                            const std::vector<std::uint16_t>& labels) {
  require_rep_matrix(reps, labels, "probe_model_accuracy");
  if (model.n_classes == 0 || model.w.size() != reps.cols() * model.n_classes) {
    throw ContractError("probe_model_accuracy: model/representation mismatch");
  }
  const std::vector<std::size_t> y(labels.begin(), labels.end());
  return raw_accuracy(reps, y, model);
}

double linear_probe_transfer(const Tensor& train_reps,
                             const std::vector<std::uint16_t>& train_labels,
                             const Tensor& test_reps,
                             const std::vector<std::uint16_t>& test_labels,
                             const ProbeConfig& cfg) {
  const ProbeModel model = fit_probe(train_reps, train_labels, cfg);
  return probe_model_accuracy(model, test_reps, test_labels);
}

// --------------------------------------------------------------------------
// Fisher LDA
// --------------------------------------------------------------------------

LdaReport fisher_lda(const Tensor& reps,
                     const std::vector<std::uint16_t>& labels) {
  require_rep_matrix(reps, labels, "fisher_lda");
  const std::size_t dim = reps.cols();
  const auto& values = reps.values();

  const auto groups = group_by_class(labels);
  std::vector<std::uint16_t> classes;
  for (std::size_t c = 0; c < groups.size(); ++c) {
    if (groups[c].empty()) continue;
    if (groups[c].size() < 2) {
      std::ostringstream msg;
      msg << "fisher_lda: class " << c << " has fewer than 2 points";
      throw ContractError(msg.str());
    }
    classes.push_back(static_cast<std::uint16_t>(c));
  }
  if (classes.size() < 2) {
    throw ContractError("fisher_lda: at least two classes required");
  }

  // Per-class mean and within-class spread over unordered index pairs.
  std::vector<std::vector<double>> means;
  std::vector<double> spread;
  for (const auto c : classes) {
    const auto& idx = groups[c];
    std::vector<double> mu(dim, 0.0);
    for (const auto i : idx) {
      for (std::size_t k = 0; k < dim; ++k) mu[k] += values[i * dim + k];
    }
    for (auto& v : mu) v /= static_cast<double>(idx.size());
    means.push_back(std::move(mu));

    double acc = 0.0;
    for (std::size_t a = 0; a < idx.size(); ++a) {
      for (std::size_t b = a + 1; b < idx.size(); ++b) {
        acc += squared_row_distance(values, dim, idx[a], idx[b]);
      }
    }
    spread.push_back(acc);
  }

  LdaReport report;
  std::vector<double> valid;
  for (std::size_t a = 0; a < classes.size(); ++a) {
    for (std::size_t b = 0; b < classes.size(); ++b) {
      if (a == b) continue;
      double num = 0.0;
      for (std::size_t k = 0; k < dim; ++k) {
        const double d = means[a][k] - means[b][k];
        num += d * d;
      }
      LdaPair pair;
      pair.class_a = classes[a];
      pair.class_b = classes[b];
      if (spread[a] < kLdaDegenerateThreshold) {
        pair.degenerate = true;
        ++report.degenerate_count;
      } else {
        pair.f = num / spread[a];
        valid.push_back(pair.f);
      }
      report.pairs.push_back(pair);
    }
  }

  if (!valid.empty()) {
    std::sort(valid.begin(), valid.end());
    const std::size_t mid = valid.size() / 2;
    report.median = (valid.size() % 2 == 1)
                        ? valid[mid]
                        : 0.5 * (valid[mid - 1] + valid[mid]);
    report.median_defined = true;
  }
  return report;
}

// --------------------------------------------------------------------------
// Within-class variance
// --------------------------------------------------------------------------

namespace {

// Exact double-sum form: 1/(2 n^2) * sum over ordered pairs of ||x_i - x_j||^2.
double pairwise_variance(const std::vector<double>& values, std::size_t dim,
                         const std::vector<std::size_t>& idx) {
  const std::size_t n = idx.size();
  double acc = 0.0;
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) {
      acc += squared_row_distance(values, dim, idx[a], idx[b]);
    }
  }
  // Ordered pairs double the unordered sum; the diagonal contributes zero.
  return acc / static_cast<double>(n * n);
}

}  // namespace

ClassVarianceReport class_variance(const Tensor& reps,
                                   const std::vector<std::uint16_t>& labels) {
  require_rep_matrix(reps, labels, "class_variance");
  const std::size_t dim = reps.cols();
  const auto& values = reps.values();
  const auto groups = group_by_class(labels);

  ClassVarianceReport report;
  report.per_class.assign(groups.size(), 0.0);
  report.class_size.assign(groups.size(), 0);
  for (std::size_t c = 0; c < groups.size(); ++c) {
    report.class_size[c] = groups[c].size();
    if (!groups[c].empty()) {
      report.per_class[c] = pairwise_variance(values, dim, groups[c]);
    }
  }

  std::vector<std::size_t> all(reps.rows());
  std::iota(all.begin(), all.end(), std::size_t{0});
  report.pooled = pairwise_variance(values, dim, all);
  return report;
}

// --------------------------------------------------------------------------
// Corruption error scores
// --------------------------------------------------------------------------

double default_normalizer(CorruptionKind kind) {
  switch (kind) {
    case CorruptionKind::gaussian_noise:
      return 88.6;
    case CorruptionKind::shot_noise:
      return 89.4;
    case CorruptionKind::impulse_noise:
      return 92.3;
  }
  throw ContractError("default_normalizer: unknown corruption kind");
}

void ErrorTable::validate() const {
  if (rows.empty()) throw ContractError("mce_rce: error table is empty");
  auto check_percent = [](double v, const char* what) {
    if (!std::isfinite(v) || v < 0.0 || v > 100.0) {
      throw ContractError(std::string("mce_rce: ") + what +
                          " must lie in [0, 100]");
    }
  };
  check_percent(clean_error, "clean error");
  check_percent(normalizer_clean, "clean normalizer");
  std::vector<bool> seen(3, false);
  for (const auto& row : rows) {
    const auto slot = static_cast<std::size_t>(row.kind);
    if (slot >= seen.size() || seen[slot]) {
      throw ContractError("mce_rce: duplicate or unknown corruption kind");
    }
    seen[slot] = true;
    for (const auto e : row.severity_error) check_percent(e, "severity error");
    if (!std::isfinite(row.normalizer) || row.normalizer <= 0.0) {
      throw ContractError("mce_rce: normalizers must be positive");
    }
  }
}

RobustnessReport mce_rce(const ErrorTable& table) {
  table.validate();
  RobustnessReport report;
  double ce_sum = 0.0;
  double rce_sum = 0.0;
  std::size_t rce_count = 0;

  for (const auto& row : table.rows) {
    RobustnessRow out;
    out.kind = row.kind;

    // Numerator and denominator accumulate with identical arithmetic so an
    // identity table scores exactly 100.
    double ce_num = 0.0, ce_den = 0.0;
    double rce_num = 0.0, rce_den = 0.0;
    for (std::size_t s = 0; s < kSeverityCount; ++s) {
      ce_num += row.severity_error[s];
      ce_den += row.normalizer;
      rce_num += row.severity_error[s] - table.clean_error;
      rce_den += row.normalizer - table.normalizer_clean;
    }
    out.ce = ce_num / ce_den * 100.0;
    ce_sum += out.ce;
    if (rce_den == 0.0) {
      report.warnings.push_back("rCE undefined for " + to_string(row.kind) +
                                ": reference denominator is zero; excluded "
                                "from the mean");
    } else {
      out.rce = rce_num / rce_den * 100.0;
      out.rce_defined = true;
      rce_sum += out.rce;
      ++rce_count;
    }
    report.rows.push_back(out);
  }

  report.mce = ce_sum / static_cast<double>(report.rows.size());
  if (rce_count > 0) {
    report.mrce = rce_sum / static_cast<double>(rce_count);
    report.mrce_defined = true;
  }
  return report;
}

// --------------------------------------------------------------------------
// Overlap graph diagnostics
// --------------------------------------------------------------------------

namespace {

// Eccentricities via BFS; returns false when some node is unreachable.
bool bfs_eccentricity(const std::vector<std::vector<std::uint32_t>>& adj,
                      std::size_t source, std::size_t* ecc) {
  std::vector<std::uint32_t> dist(adj.size(),
                                  std::numeric_limits<std::uint32_t>::max());
  std::queue<std::uint32_t> frontier;
  dist[source] = 0;
  frontier.push(static_cast<std::uint32_t>(source));
  std::size_t visited = 1;
  std::uint32_t furthest = 0;
  while (!frontier.empty()) {
    const std::uint32_t u = frontier.front();
    frontier.pop();
    for (const auto v : adj[u]) {
      if (dist[v] != std::numeric_limits<std::uint32_t>::max()) continue;
      dist[v] = dist[u] + 1;
      furthest = std::max(furthest, dist[v]);
      ++visited;
      frontier.push(v);
    }
  }
  *ecc = furthest;
  return visited == adj.size();
}

}  // namespace

OverlapDiagnostics overlap_graph_diagnostics(const Tensor& points, double b) {
  if (points.rank() != 2) {
    throw ContractError("overlap_graph: points must be rank-2");
  }
  const std::size_t n = points.rows();
  if (n < 2) throw ContractError("overlap_graph: need at least two points");
  if (!(b > 0.0) || !std::isfinite(b)) {
    throw ContractError("overlap_graph: radius must be finite and positive");
  }

  const std::size_t dim = points.cols();
  const auto& values = points.values();
  const double threshold = 4.0 * b * b;  // edge iff squared distance < (2B)^2

  OverlapDiagnostics diag;
  diag.nodes = n;
  std::vector<std::vector<std::uint32_t>> adj(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (squared_row_distance(values, dim, i, j) < threshold) {
        adj[i].push_back(static_cast<std::uint32_t>(j));
        adj[j].push_back(static_cast<std::uint32_t>(i));
        ++diag.edges;
      }
    }
  }

  diag.connected = true;
  std::size_t diameter = 0;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t ecc = 0;
    if (!bfs_eccentricity(adj, i, &ecc)) {
      diag.connected = false;
      diag.diameter_finite = false;
      diag.diameter = 0;
      return diag;
    }
    diameter = std::max(diameter, ecc);
  }
  diag.diameter_finite = true;
  diag.diameter = diameter;
  return diag;
}

ErConnectivity er_connectivity(std::size_t n, double p, std::size_t samples,
                               std::uint64_t seed) {
  if (n < 2) throw ContractError("er_connectivity: need n >= 2");
  if (!(p >= 0.0 && p <= 1.0)) {
    throw ContractError("er_connectivity: p must lie in [0, 1]");
  }
  if (samples == 0) throw ContractError("er_connectivity: samples must be >= 1");

  Rng rng(seed);
  ErConnectivity result;
  result.samples = samples;
  std::vector<std::vector<std::uint32_t>> adj(n);
  for (std::size_t s = 0; s < samples; ++s) {
    for (auto& row : adj) row.clear();
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        if (rng.bernoulli(p)) {
          adj[i].push_back(static_cast<std::uint32_t>(j));
          adj[j].push_back(static_cast<std::uint32_t>(i));
        }
      }
    }
    std::size_t ecc = 0;
    if (bfs_eccentricity(adj, 0, &ecc)) ++result.connected_samples;
  }
  result.connectivity_rate = static_cast<double>(result.connected_samples) /
                             static_cast<double>(samples);
  return result;
}

}  // namespace relic
