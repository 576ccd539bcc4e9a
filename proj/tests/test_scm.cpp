#include "relic/scm.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "relic/errors.hpp"
#include "relic/partition.hpp"
#include "relic/rng.hpp"

namespace relic {
namespace {

std::vector<double> dirichlet_row(Rng& rng, std::size_t width) {
  std::vector<double> row(width);
  double total = 0.0;
  for (double& v : row) {
    v = -std::log(1.0 - rng.uniform());
    total += v;
  }
  for (double& v : row) v /= total;
  return row;
}

DiscreteSCM random_scm(Rng& rng, std::size_t n_c, std::size_t n_s,
                       std::size_t n_x, std::size_t n_yr,
                       std::vector<std::size_t> n_yt) {
  DiscreteSCM scm;
  scm.n_c = n_c;
  scm.n_s = n_s;
  scm.n_x = n_x;
  scm.n_yr = n_yr;
  scm.n_yt = n_yt;
  scm.p_c = dirichlet_row(rng, n_c);
  scm.p_s = dirichlet_row(rng, n_s);
  for (std::size_t cs = 0; cs < n_c * n_s; ++cs) {
    const auto row = dirichlet_row(rng, n_x);
    scm.p_x_given_cs.insert(scm.p_x_given_cs.end(), row.begin(), row.end());
  }
  for (std::size_t c = 0; c < n_c; ++c) {
    const auto row = dirichlet_row(rng, n_yr);
    scm.p_yr_given_c.insert(scm.p_yr_given_c.end(), row.begin(), row.end());
  }
  for (std::size_t w : n_yt) {
    std::vector<double> mech;
    for (std::size_t r = 0; r < n_yr; ++r) {
      const auto row = dirichlet_row(rng, w);
      mech.insert(mech.end(), row.begin(), row.end());
    }
    scm.tasks.push_back(std::move(mech));
  }
  scm.validate();
  return scm;
}

// X deterministically encodes the (C,S) pair: x = c * n_s + s.
DiscreteSCM pair_encoding_scm(Rng& rng, std::size_t n_c, std::size_t n_s,
                              std::size_t n_yr) {
  DiscreteSCM scm = random_scm(rng, n_c, n_s, n_c * n_s, n_yr, {n_yr});
  std::fill(scm.p_x_given_cs.begin(), scm.p_x_given_cs.end(), 0.0);
  for (std::size_t c = 0; c < n_c; ++c) {
    for (std::size_t s = 0; s < n_s; ++s) {
      scm.p_x_given_cs[(c * n_s + s) * scm.n_x + (c * n_s + s)] = 1.0;
    }
  }
  scm.validate();
  return scm;
}

TEST(Scm, ValidateRejectsMalformedTables) {
  Rng rng(1);
  DiscreteSCM scm = random_scm(rng, 2, 2, 3, 2, {2});
  scm.p_c[0] += 0.5;
  EXPECT_THROW(scm.validate(), ContractError);
}

TEST(Scm, InterventionalJointSumsToOne) {
  Rng rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    DiscreteSCM scm = random_scm(rng, 3, 2, 4, 3, {2, 3});
    for (std::size_t s = 0; s < scm.n_s; ++s) {
      EXPECT_NEAR(intervene(scm, s).total(), 1.0, 1e-10);
    }
  }
  DiscreteSCM scm = random_scm(rng, 2, 2, 2, 2, {2});
  EXPECT_THROW(intervene(scm, 5), ContractError);
}

TEST(Scm, StyleFreeGenerationMakesAllInterventionsEqual) {
  Rng rng(3);
  DiscreteSCM scm = random_scm(rng, 3, 3, 4, 2, {2});
  // Overwrite P(X|C,S) with a per-C row shared across S.
  for (std::size_t c = 0; c < scm.n_c; ++c) {
    const auto row = dirichlet_row(rng, scm.n_x);
    for (std::size_t s = 0; s < scm.n_s; ++s) {
      std::copy(row.begin(), row.end(),
                scm.p_x_given_cs.begin() + (c * scm.n_s + s) * scm.n_x);
    }
  }
  const auto j0 = intervene(scm, 0);
  for (std::size_t s = 1; s < scm.n_s; ++s) {
    const auto js = intervene(scm, s);
    for (std::size_t k = 0; k < j0.p.size(); ++k) {
      EXPECT_DOUBLE_EQ(j0.p[k], js.p[k]);
    }
  }
}

TEST(Scm, SingleStyleInterventionIsObservational) {
  Rng rng(4);
  DiscreteSCM scm = random_scm(rng, 2, 1, 3, 2, {2});
  const auto joint = intervene(scm, 0);
  // Observational joint with |S|=1 computed directly.
  for (std::size_t c = 0; c < scm.n_c; ++c) {
    for (std::size_t x = 0; x < scm.n_x; ++x) {
      for (std::size_t r = 0; r < scm.n_yr; ++r) {
        const double expected = scm.p_c[c] * scm.px(c, 0, x) * scm.pyr(c, r);
        EXPECT_DOUBLE_EQ(joint.p[(c * scm.n_x + x) * scm.n_yr + r], expected);
      }
    }
  }
}

TEST(Scm, InterveneCommutesWithContentMarginalization) {
  Rng rng(5);
  DiscreteSCM scm = random_scm(rng, 3, 2, 4, 3, {2});
  RepresentationTable f{2, {0, 1, 0, 1}};
  for (std::size_t s = 0; s < scm.n_s; ++s) {
    const auto zr = intervene(scm, s).marginal_zr(f);
    // Independent order: marginalize C first, then map X to Z.
    std::vector<double> alt(f.n_z * scm.n_yr, 0.0);
    for (std::size_t x = 0; x < scm.n_x; ++x) {
      for (std::size_t r = 0; r < scm.n_yr; ++r) {
        double pxr = 0.0;
        for (std::size_t c = 0; c < scm.n_c; ++c) {
          pxr += scm.p_c[c] * scm.px(c, s, x) * scm.pyr(c, r);
        }
        alt[f.z_of_x[x] * scm.n_yr + r] += pxr;
      }
    }
    for (std::size_t k = 0; k < zr.size(); ++k) {
      EXPECT_NEAR(zr[k], alt[k], 1e-12);
    }
  }
}

TEST(Scm, ConstantRepresentationIsInvariant) {
  Rng rng(6);
  for (int trial = 0; trial < 10; ++trial) {
    DiscreteSCM scm = random_scm(rng, 3, 3, 4, 3, {2});
    RepresentationTable f{1, std::vector<std::size_t>(scm.n_x, 0)};
    const auto report = check_invariant_representation(scm, f, -1, 1e-9);
    EXPECT_TRUE(report.invariant);
    EXPECT_EQ(report.skipped_cells, 0u);
  }
}

TEST(Scm, ContentRecoveringRepresentationIsInvariant) {
  Rng rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    DiscreteSCM scm = pair_encoding_scm(rng, 3, 2, 3);
    RepresentationTable f;
    f.n_z = scm.n_c;
    for (std::size_t x = 0; x < scm.n_x; ++x) {
      f.z_of_x.push_back(x / scm.n_s);  // recover c from the pair encoding
    }
    EXPECT_TRUE(check_invariant_representation(scm, f, -1, 1e-9).invariant);
    const auto report = verify_theorem1(scm, f, 1e-9);
    EXPECT_TRUE(report.antecedent.invariant);
    for (const auto& c : report.consequents) EXPECT_TRUE(c.invariant);
    EXPECT_FALSE(report.violation);
  }
}

// Style-contaminated representation on a 2x2x4 SCM: X carries (C xor S) in
// its high bit plus a noise bit, f reads the high bit, Y^R = C. Conditioning
// on f(X) then flips meaning with the intervened style, so Eq. 1 fails.
TEST(Scm, StyleContaminatedRepresentationViolatesInvariance) {
  DiscreteSCM scm;
  scm.n_c = 2;
  scm.n_s = 2;
  scm.n_x = 4;
  scm.n_yr = 2;
  scm.n_yt = {2};
  scm.p_c = {0.5, 0.5};
  scm.p_s = {0.5, 0.5};
  scm.p_x_given_cs.assign(2 * 2 * 4, 0.0);
  for (std::size_t c = 0; c < 2; ++c) {
    for (std::size_t s = 0; s < 2; ++s) {
      const std::size_t hi = c ^ s;
      scm.p_x_given_cs[(c * 2 + s) * 4 + hi * 2 + 0] = 0.5;
      scm.p_x_given_cs[(c * 2 + s) * 4 + hi * 2 + 1] = 0.5;
    }
  }
  scm.p_yr_given_c = {1.0, 0.0, 0.0, 1.0};  // Y^R = C
  scm.tasks = {task_from_partition(instance_discrimination(2))};  // Y_t = Y^R
  scm.validate();

  RepresentationTable f{2, {0, 0, 1, 1}};  // reads the high bit
  const auto report = check_invariant_representation(scm, f, -1, 1e-9);
  EXPECT_FALSE(report.invariant);
  EXPECT_EQ(report.skipped_cells, 0u);
  EXPECT_NEAR(report.max_gap, 1.0, 1e-12);  // conditionals flip completely

  // Antecedent fails, so Theorem 1's implication is not violated.
  EXPECT_FALSE(verify_theorem1(scm, f, 1e-9).violation);
}

TEST(Scm, IdentityTaskMakesConsequentMatchAntecedent) {
  Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    DiscreteSCM scm = random_scm(rng, 2, 2, 4, 3, {});
    scm.n_yt = {3};
    scm.tasks = {task_from_partition(instance_discrimination(3))};
    scm.validate();
    RepresentationTable f{2, {0, 1, 1, 0}};
    const auto report = verify_theorem1(scm, f, 1e-9);
    EXPECT_EQ(report.antecedent.invariant, report.consequents[0].invariant);
    EXPECT_NEAR(report.antecedent.max_gap, report.consequents[0].max_gap, 1e-12);
    EXPECT_FALSE(report.violation);
  }
}

TEST(Scm, TaskFromPartitionIsDeterministicMechanism) {
  Partition p({0, 0, 1});
  const auto mech = task_from_partition(p);
  ASSERT_EQ(mech.size(), 6u);
  EXPECT_DOUBLE_EQ(mech[0], 1.0);  // r=0 -> block 0
  EXPECT_DOUBLE_EQ(mech[2], 1.0);  // r=1 -> block 0
  EXPECT_DOUBLE_EQ(mech[5], 1.0);  // r=2 -> block 1
}

TEST(ScmEnumeration, SingletonLimitsEmitExactlyOneScm) {
  GridLimits limits;
  limits.max_c = limits.max_s = limits.max_x = limits.max_yr = 1;
  limits.max_yt = limits.max_z = limits.max_tasks = 1;
  std::size_t count = 0;
  enumerate_scms_grid(limits, [&](const DiscreteSCM& scm,
                                  const RepresentationTable& f) {
    ++count;
    scm.validate();
    EXPECT_EQ(scm.n_c, 1u);
    EXPECT_EQ(f.n_z, 1u);
  });
  EXPECT_EQ(count, 1u);
}

TEST(ScmEnumeration, ZeroOneGridEnumeratesOnlyDeterministicMechanisms) {
  GridLimits limits;
  limits.max_c = limits.max_s = 1;
  limits.max_x = 2;
  limits.max_yr = 2;
  limits.max_yt = 2;
  limits.max_z = 2;
  limits.max_tasks = 1;
  limits.grid = {0.0, 1.0};
  std::size_t count = 0;
  enumerate_scms_grid(limits, [&](const DiscreteSCM& scm,
                                  const RepresentationTable&) {
    ++count;
    scm.validate();
    for (double v : scm.p_x_given_cs) {
      EXPECT_TRUE(v == 0.0 || v == 1.0);
    }
    for (double v : scm.p_yr_given_c) {
      EXPECT_TRUE(v == 0.0 || v == 1.0);
    }
  });
  EXPECT_GT(count, 0u);
}

TEST(ScmEnumeration, InfeasibleGridIsConfigError) {
  GridLimits limits;
  limits.grid = {0.3};
  EXPECT_THROW(
      enumerate_scms_grid(limits, [](const DiscreteSCM&,
                                     const RepresentationTable&) {}),
      ConfigError);
}

TEST(ScmEnumeration, FuzzStreamIsDeterministic) {
  GridLimits limits;
  std::vector<std::string> first, second;
  enumerate_scms_fuzz(50, 99, limits,
                      [&](const DiscreteSCM& scm, const RepresentationTable& f) {
                        scm.validate();
                        first.push_back(serialize_scm(scm, f));
                      });
  enumerate_scms_fuzz(50, 99, limits,
                      [&](const DiscreteSCM& scm, const RepresentationTable& f) {
                        second.push_back(serialize_scm(scm, f));
                      });
  EXPECT_EQ(first, second);
}

TEST(ScmSweep, SmallGridSweepFindsNoViolations) {
  GridLimits limits;
  limits.max_c = limits.max_s = 2;
  limits.max_x = 3;
  limits.max_yr = 2;
  limits.max_yt = 2;
  limits.max_z = 2;
  limits.max_tasks = 1;
  limits.budget_per_tuple = 300;
  const auto result = sweep_theorem1_grid(limits, 1e-9);
  EXPECT_GT(result.models, 1000u);
  EXPECT_GT(result.antecedent_true, 0u);
  EXPECT_EQ(result.violations, 0u);
  EXPECT_FALSE(result.first_counterexample.has_value());
}

TEST(ScmSweep, FuzzSweepFindsNoViolations) {
  GridLimits limits;
  const auto result = sweep_theorem1_fuzz(2000, 7, limits, 1e-9);
  EXPECT_EQ(result.models, 2000u);
  EXPECT_GT(result.antecedent_true, 0u);
  EXPECT_EQ(result.violations, 0u);
}

}  // namespace
}  // namespace relic
