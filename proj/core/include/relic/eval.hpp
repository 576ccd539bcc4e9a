#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "relic/datagen.hpp"
#include "relic/tensor.hpp"

namespace relic {

// ---------------------------------------------------------------------------
// Linear probe
// ---------------------------------------------------------------------------

enum class ProbeProtocol {
  // Train and report on the full set; exactly invariant under dataset
  // duplication because every update is full-batch.
  full_batch,
  // Shuffled thirds (train / val / test): the best validation epoch over the
  // learning-rate grid is evaluated once on the held-out test fold.
  three_fold,
};

struct ProbeConfig {
  ProbeProtocol protocol = ProbeProtocol::three_fold;
  std::size_t epochs = 200;
  std::vector<double> lr_grid = {0.1, 0.3, 1.0};
  double momentum = 0.9;
  std::uint64_t seed = 0;

  void validate() const;  // throws ConfigError
};

struct ProbeResult {
  double accuracy = 0.0;      // test-fold accuracy in [0, 1]
  double val_accuracy = 0.0;  // accuracy of the selected snapshot on val
  double best_lr = 0.0;
  std::size_t best_epoch = 0;
};

// Multinomial logistic regression on frozen representations, trained by
// seeded full-batch SGD with momentum. Throws ContractError when fewer than
// two classes are present.
ProbeResult linear_probe(const Tensor& reps,
                         const std::vector<std::uint16_t>& labels,
                         const ProbeConfig& cfg = {});

// A fitted probe head, reusable against many evaluation sets (e.g. the
// corrupted copies of one test set).
struct ProbeModel {
  std::vector<double> w;  // {dim, n_classes} row-major
  std::vector<double> b;  // {n_classes}
  std::size_t n_classes = 0;
  double train_accuracy = 0.0;
  double best_lr = 0.0;
  std::size_t best_epoch = 0;
};

// Full-batch fit on the whole set; keeps the snapshot with the best training
// accuracy across the lr grid (earliest lr/epoch wins ties).
ProbeModel fit_probe(const Tensor& reps,
                     const std::vector<std::uint16_t>& labels,
                     const ProbeConfig& cfg = {});

double probe_model_accuracy(const ProbeModel& model, const Tensor& reps,
                            const std::vector<std::uint16_t>& labels);

// fit_probe on the first set, accuracy on the second.
double linear_probe_transfer(const Tensor& train_reps,
                             const std::vector<std::uint16_t>& train_labels,
                             const Tensor& test_reps,
                             const std::vector<std::uint16_t>& test_labels,
                             const ProbeConfig& cfg = {});

// ---------------------------------------------------------------------------
// Fisher LDA separability
// ---------------------------------------------------------------------------

struct LdaPair {
  std::uint16_t class_a = 0;  // class providing the within-class denominator
  std::uint16_t class_b = 0;
  double f = 0.0;
  bool degenerate = false;  // within-class spread below threshold
};

struct LdaReport {
  std::vector<LdaPair> pairs;  // every ordered pair (a, b), a != b
  double median = 0.0;         // over non-degenerate pairs
  bool median_defined = false;
  std::size_t degenerate_count = 0;
};

// F(a -> b) = ||mu_a - mu_b||^2 / sum_{i<j in class a} ||f_i - f_j||^2.
// Pairs whose denominator falls below kLdaDegenerateThreshold are flagged
// and excluded from the median. Requires >= 2 classes, each with >= 2 points.
inline constexpr double kLdaDegenerateThreshold = 1e-12;

LdaReport fisher_lda(const Tensor& reps,
                     const std::vector<std::uint16_t>& labels);

// ---------------------------------------------------------------------------
// Within-class variance
// ---------------------------------------------------------------------------

struct ClassVarianceReport {
  std::vector<double> per_class;        // indexed by class id
  std::vector<std::size_t> class_size;  // 0 for absent ids
  double pooled = 0.0;                  // same formula over all rows
};

// sigma_f^2(k) = 1 / (2 N_k^2) * sum_i sum_j ||f_i - f_j||^2 over ordered
// index pairs within class k. Equals the trace of the biased within-class
// covariance. Requires every present class to be nonempty and N >= 1.
ClassVarianceReport class_variance(const Tensor& reps,
                                   const std::vector<std::uint16_t>& labels);

// ---------------------------------------------------------------------------
// Corruption error scores
// ---------------------------------------------------------------------------

inline constexpr std::size_t kSeverityCount = 5;

// Average reference (AlexNet) error across severities for each corruption.
double default_normalizer(CorruptionKind kind);

// Classic reference clean top-1 error (percent) paired with the normalizers.
inline constexpr double kDefaultNormalizerClean = 43.5;

struct CorruptionErrorRow {
  CorruptionKind kind = CorruptionKind::gaussian_noise;
  std::array<double, kSeverityCount> severity_error{};  // percent, [0, 100]
  double normalizer = 0.0;  // average reference error across severities
};

struct ErrorTable {
  std::vector<CorruptionErrorRow> rows;
  double clean_error = 0.0;                         // percent
  double normalizer_clean = kDefaultNormalizerClean;  // percent

  void validate() const;  // throws ContractError
};

struct RobustnessRow {
  CorruptionKind kind = CorruptionKind::gaussian_noise;
  double ce = 0.0;
  double rce = 0.0;
  bool rce_defined = false;
};

struct RobustnessReport {
  std::vector<RobustnessRow> rows;
  double mce = 0.0;
  double mrce = 0.0;
  bool mrce_defined = false;
  std::vector<std::string> warnings;
};

// CE_c  = sum_s E_{s,c} / sum_s N_c * 100 with N_c the per-severity average
//         reference error (so the denominator is kSeverityCount * N_c).
// rCE_c = sum_s (E_{s,c} - E_clean) / sum_s (N_c - N_clean) * 100.
// A vanishing denominator flags the entry undefined; it is excluded from the
// mean and a warning is recorded.
RobustnessReport mce_rce(const ErrorTable& table);

// ---------------------------------------------------------------------------
// Overlap graph diagnostics
// ---------------------------------------------------------------------------

struct OverlapDiagnostics {
  std::size_t nodes = 0;
  std::size_t edges = 0;
  bool connected = false;
  bool diameter_finite = false;
  std::size_t diameter = 0;  // meaningful only when diameter_finite
};

// Graph on representation rows with an edge whenever ||x_i - x_j|| < 2B
// (strict, so points spaced exactly B apart on a line form a chain).
// Connectivity and exact diameter via BFS from every node. Requires
// at least two points and B > 0.
OverlapDiagnostics overlap_graph_diagnostics(const Tensor& points, double b);

struct ErConnectivity {
  std::size_t samples = 0;
  std::size_t connected_samples = 0;
  double connectivity_rate = 0.0;
};

// Samples G(n, p) graphs and reports the fraction that are connected.
// Requires n >= 2, p in [0, 1], samples >= 1.
ErConnectivity er_connectivity(std::size_t n, double p, std::size_t samples,
                               std::uint64_t seed);

}  // namespace relic
