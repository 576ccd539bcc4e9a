#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "relic/partition.hpp"

namespace relic {

// Finite structural causal model over (C, S, X, {Y_t}, Y^R):
//   C ~ p_c,  S ~ p_s  (independent),  X ~ p_x_given_cs[c][s],
//   Y^R ~ p_yr_given_c[c],  Y_t ~ tasks[t][y^r].
// Tasks depend on Y^R only, which encodes structurally that Y^R refines
// every task. There is no S -> Y edge anywhere.
struct DiscreteSCM {
  std::size_t n_c = 1, n_s = 1, n_x = 1, n_yr = 1;
  std::vector<std::size_t> n_yt;         // per-task domain sizes
  std::vector<double> p_c;               // [c]
  std::vector<double> p_s;               // [s]
  std::vector<double> p_x_given_cs;      // [c*n_s*n_x + s*n_x + x]
  std::vector<double> p_yr_given_c;      // [c*n_yr + r]
  std::vector<std::vector<double>> tasks;  // tasks[t][r*n_yt[t] + y]

  double px(std::size_t c, std::size_t s, std::size_t x) const {
    return p_x_given_cs[(c * n_s + s) * n_x + x];
  }
  double pyr(std::size_t c, std::size_t r) const {
    return p_yr_given_c[c * n_yr + r];
  }

  // Throws ContractError if any distribution row is malformed.
  void validate(double tol = 1e-12) const;
};

// Total function X -> Z with finite codomain; stands in for f(X).
struct RepresentationTable {
  std::size_t n_z = 1;
  std::vector<std::size_t> z_of_x;  // size n_x, values < n_z
};

// Joint p^{do(S=s)}(C, X, Y^R), flattened [c][x][r]. Task joints factor
// through it via the task mechanisms.
struct InterventionalJoint {
  std::size_t n_c, n_x, n_yr;
  std::size_t style;
  std::vector<double> p;  // [c*n_x*n_yr + x*n_yr + r]

  double total() const;
  // p^{do(s)}(Y^R = r, f(X) = z) for the given representation.
  std::vector<double> marginal_zr(const RepresentationTable& f) const;
};

InterventionalJoint intervene(const DiscreteSCM& scm, std::size_t s);

struct InvarianceReport {
  bool invariant = true;
  double max_gap = 0.0;        // largest cross-style conditional difference
  std::size_t skipped_cells = 0;  // z-cells with zero mass under some style
};

// target < 0 checks Y^R; target >= 0 checks task index `target`.
// Conditionals p^{do(s)}(Y | f(X) = z) are compared across all style pairs;
// cells with zero mass under one of the two styles are skipped and counted.
InvarianceReport check_invariant_representation(const DiscreteSCM& scm,
                                                const RepresentationTable& f,
                                                int target, double tol);

struct Theorem1Report {
  InvarianceReport antecedent;          // invariance for Y^R
  std::vector<InvarianceReport> consequents;  // one per task
  bool violation = false;               // antecedent holds, some consequent fails
};

Theorem1Report verify_theorem1(const DiscreteSCM& scm,
                               const RepresentationTable& f, double tol);

// Deterministic task mechanism sending each Y^R block to its label under a
// partition of {0..n_yr-1}: P(Y_t = p.block_of(r) | Y^R = r) = 1.
std::vector<double> task_from_partition(const Partition& p);

struct GridLimits {
  std::size_t max_c = 3, max_s = 3, max_x = 4, max_yr = 4, max_yt = 3;
  std::size_t max_z = 3;
  std::size_t max_tasks = 2;
  std::vector<double> grid = {0.0, 0.25, 0.5, 0.75, 1.0};
  // Assignments visited per size tuple. Tuples whose full assignment count
  // fits the budget are enumerated exhaustively; larger tuples are covered
  // by an evenly strided deterministic subset of the same enumeration order.
  // The default visits ~90M models in about a minute.
  std::uint64_t budget_per_tuple = 20000;
};

struct SweepResult {
  std::uint64_t models = 0;
  std::uint64_t antecedent_true = 0;
  std::uint64_t violations = 0;
  std::uint64_t skipped_cell_models = 0;  // models where zero-mass cells were skipped
  std::optional<std::string> first_counterexample;  // serialized SCM + f
};

using ScmVisitor =
    std::function<void(const DiscreteSCM&, const RepresentationTable&)>;

// Deterministic stream of (SCM, f) pairs over the probability grid. P(S) is
// fixed uniform: Theorem 1 quantifies only over do(S=s) distributions, which
// never involve P(S). Size tuples whose assignment count exceeds the budget
// are covered by an evenly strided subset in the same deterministic order.
void enumerate_scms_grid(const GridLimits& limits, const ScmVisitor& visit);

// Seeded random SCMs (flat-Dirichlet rows with occasional hard zeros to
// exercise undefined-cell handling) and random representation tables.
void enumerate_scms_fuzz(std::uint64_t n_models, std::uint64_t seed,
                         const GridLimits& limits, const ScmVisitor& visit);

SweepResult sweep_theorem1_grid(const GridLimits& limits, double tol,
                                const std::function<void(std::uint64_t)>&
                                    progress = nullptr);
SweepResult sweep_theorem1_fuzz(std::uint64_t n_models, std::uint64_t seed,
                                const GridLimits& limits, double tol);

std::string serialize_scm(const DiscreteSCM& scm, const RepresentationTable& f);

}  // namespace relic
