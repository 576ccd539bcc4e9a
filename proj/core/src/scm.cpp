#include "relic/scm.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "relic/errors.hpp"
#include "relic/rng.hpp"

namespace relic {

namespace {

void check_row(const std::vector<double>& v, std::size_t offset,
               std::size_t width, double tol, const char* what) {
  double s = 0.0;
  for (std::size_t i = 0; i < width; ++i) {
    const double p = v[offset + i];
    if (p < 0.0) {
      throw ContractError(std::string(what) + ": negative probability");
    }
    s += p;
  }
  if (std::abs(s - 1.0) > tol) {
    throw ContractError(std::string(what) + ": row sums to " +
                        std::to_string(s) + ", not 1");
  }
}

}  // namespace

void DiscreteSCM::validate(double tol) const {
  if (n_c == 0 || n_s == 0 || n_x == 0 || n_yr == 0) {
    throw ContractError("scm: empty domain");
  }
  if (p_c.size() != n_c || p_s.size() != n_s ||
      p_x_given_cs.size() != n_c * n_s * n_x ||
      p_yr_given_c.size() != n_c * n_yr || tasks.size() != n_yt.size()) {
    throw ContractError("scm: table sizes inconsistent with domains");
  }
  check_row(p_c, 0, n_c, tol, "P(C)");
  check_row(p_s, 0, n_s, tol, "P(S)");
  for (std::size_t c = 0; c < n_c; ++c) {
    for (std::size_t s = 0; s < n_s; ++s) {
      check_row(p_x_given_cs, (c * n_s + s) * n_x, n_x, tol, "P(X|C,S)");
    }
    check_row(p_yr_given_c, c * n_yr, n_yr, tol, "P(Y^R|C)");
  }
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    if (n_yt[t] == 0 || tasks[t].size() != n_yr * n_yt[t]) {
      throw ContractError("scm: task table size mismatch");
    }
    for (std::size_t r = 0; r < n_yr; ++r) {
      check_row(tasks[t], r * n_yt[t], n_yt[t], tol, "P(Y_t|Y^R)");
    }
  }
}

double InterventionalJoint::total() const {
  double s = 0.0;
  for (double v : p) s += v;
  return s;
}

std::vector<double> InterventionalJoint::marginal_zr(
    const RepresentationTable& f) const {
  std::vector<double> out(f.n_z * n_yr, 0.0);
  for (std::size_t c = 0; c < n_c; ++c) {
    for (std::size_t x = 0; x < n_x; ++x) {
      const std::size_t z = f.z_of_x[x];
      const double* row = p.data() + (c * n_x + x) * n_yr;
      double* acc = out.data() + z * n_yr;
      for (std::size_t r = 0; r < n_yr; ++r) acc[r] += row[r];
    }
  }
  return out;
}

InterventionalJoint intervene(const DiscreteSCM& scm, std::size_t s) {
  if (s >= scm.n_s) {
    throw ContractError("intervene: style value " + std::to_string(s) +
                        " outside domain of size " + std::to_string(scm.n_s));
  }
  InterventionalJoint joint;
  joint.n_c = scm.n_c;
  joint.n_x = scm.n_x;
  joint.n_yr = scm.n_yr;
  joint.style = s;
  joint.p.assign(scm.n_c * scm.n_x * scm.n_yr, 0.0);
  for (std::size_t c = 0; c < scm.n_c; ++c) {
    for (std::size_t x = 0; x < scm.n_x; ++x) {
      const double pcx = scm.p_c[c] * scm.px(c, s, x);
      double* row = joint.p.data() + (c * scm.n_x + x) * scm.n_yr;
      for (std::size_t r = 0; r < scm.n_yr; ++r) {
        row[r] = pcx * scm.pyr(c, r);
      }
    }
  }
  return joint;
}

namespace {

// q[z][y] for the requested target: Y^R itself (target < 0) or a task,
// which folds the task mechanism over r.
std::vector<double> target_marginal(const DiscreteSCM& scm,
                                    const std::vector<double>& zr,
                                    std::size_t n_z, int target) {
  if (target < 0) return zr;
  const auto& mech = scm.tasks.at(static_cast<std::size_t>(target));
  const std::size_t ny = scm.n_yt[static_cast<std::size_t>(target)];
  std::vector<double> out(n_z * ny, 0.0);
  for (std::size_t z = 0; z < n_z; ++z) {
    for (std::size_t r = 0; r < scm.n_yr; ++r) {
      const double mass = zr[z * scm.n_yr + r];
      if (mass == 0.0) continue;
      for (std::size_t y = 0; y < ny; ++y) {
        out[z * ny + y] += mass * mech[r * ny + y];
      }
    }
  }
  return out;
}

}  // namespace

InvarianceReport check_invariant_representation(const DiscreteSCM& scm,
                                                const RepresentationTable& f,
                                                int target, double tol) {
  if (f.z_of_x.size() != scm.n_x) {
    throw ContractError("representation table does not cover the X domain");
  }
  for (std::size_t z : f.z_of_x) {
    if (z >= f.n_z) throw ContractError("representation value out of range");
  }
  const std::size_t n_y =
      target < 0 ? scm.n_yr : scm.n_yt.at(static_cast<std::size_t>(target));

  // Per style: cell masses m_s(z) and conditionals q_s(y|z).
  std::vector<std::vector<double>> cond(scm.n_s);
  std::vector<std::vector<double>> mass(scm.n_s);
  for (std::size_t s = 0; s < scm.n_s; ++s) {
    const auto zr = intervene(scm, s).marginal_zr(f);
    auto zy = target_marginal(scm, zr, f.n_z, target);
    mass[s].assign(f.n_z, 0.0);
    for (std::size_t z = 0; z < f.n_z; ++z) {
      for (std::size_t y = 0; y < n_y; ++y) mass[s][z] += zy[z * n_y + y];
    }
    for (std::size_t z = 0; z < f.n_z; ++z) {
      if (mass[s][z] > 0.0) {
        for (std::size_t y = 0; y < n_y; ++y) zy[z * n_y + y] /= mass[s][z];
      }
    }
    cond[s] = std::move(zy);
  }

  InvarianceReport report;
  for (std::size_t z = 0; z < f.n_z; ++z) {
    bool some_defined = false, some_undefined = false;
    for (std::size_t s = 0; s < scm.n_s; ++s) {
      (mass[s][z] > 0.0 ? some_defined : some_undefined) = true;
    }
    if (some_defined && some_undefined) ++report.skipped_cells;
    if (!some_defined) continue;
    for (std::size_t si = 0; si < scm.n_s; ++si) {
      if (mass[si][z] == 0.0) continue;
      for (std::size_t sj = si + 1; sj < scm.n_s; ++sj) {
        if (mass[sj][z] == 0.0) continue;
        for (std::size_t y = 0; y < n_y; ++y) {
          const double gap =
              std::abs(cond[si][z * n_y + y] - cond[sj][z * n_y + y]);
          report.max_gap = std::max(report.max_gap, gap);
        }
      }
    }
  }
  report.invariant = report.max_gap <= tol;
  return report;
}

Theorem1Report verify_theorem1(const DiscreteSCM& scm,
                               const RepresentationTable& f, double tol) {
  Theorem1Report report;
  report.antecedent = check_invariant_representation(scm, f, -1, tol);
  report.consequents.reserve(scm.tasks.size());
  for (std::size_t t = 0; t < scm.tasks.size(); ++t) {
    report.consequents.push_back(
        check_invariant_representation(scm, f, static_cast<int>(t), tol));
    if (report.antecedent.invariant && !report.consequents.back().invariant) {
      report.violation = true;
    }
  }
  return report;
}

std::vector<double> task_from_partition(const Partition& p) {
  std::vector<double> mech(p.ground_size() * p.block_count(), 0.0);
  for (std::size_t r = 0; r < p.ground_size(); ++r) {
    mech[r * p.block_count() + p.block_of(r)] = 1.0;
  }
  return mech;
}

namespace {

// All probability rows of the given width with entries drawn from the grid
// and total exactly 1 (within float rounding of grid sums).
std::vector<std::vector<double>> grid_simplex_rows(
    std::size_t width, const std::vector<double>& grid) {
  std::vector<std::vector<double>> rows;
  std::vector<double> cur(width, 0.0);
  const double kTol = 1e-9;
  std::function<void(std::size_t, double)> rec = [&](std::size_t i, double sum) {
    if (i == width) {
      if (std::abs(sum - 1.0) <= kTol) rows.push_back(cur);
      return;
    }
    for (double g : grid) {
      if (sum + g > 1.0 + kTol) continue;
      cur[i] = g;
      rec(i + 1, sum + g);
    }
  };
  rec(0, 0.0);
  if (rows.empty()) {
    throw ConfigError("probability grid cannot form rows of width " +
                      std::to_string(width) + " summing to 1");
  }
  return rows;
}

using u128 = unsigned __int128;

u128 checked_mul(u128 a, std::uint64_t b) {
  const u128 kCap = u128(1) << 126;
  if (b != 0 && a > kCap / b) {
    throw ConfigError("grid enumeration space overflows; reduce limits");
  }
  return a * b;
}

// One size tuple's assignment space: a mixed-radix odometer over row choices
// for every table plus the representation digits.
struct TupleSpace {
  std::size_t n_c, n_s, n_x, n_yr, n_z;
  std::vector<std::size_t> widths;  // per-task |Y_t|
  const std::vector<std::vector<double>>* rows_c;
  const std::vector<std::vector<double>>* rows_x;
  const std::vector<std::vector<double>>* rows_yr;
  std::vector<const std::vector<std::vector<double>>*> rows_t;
  std::vector<std::uint64_t> radix;  // slot radices, f digits last
  u128 count = 1;

  void decode(u128 index, DiscreteSCM* scm, RepresentationTable* f) const {
    std::vector<std::size_t> digit(radix.size());
    for (std::size_t i = 0; i < radix.size(); ++i) {
      digit[i] = static_cast<std::size_t>(index % radix[i]);
      index /= radix[i];
    }
    std::size_t slot = 0;
    scm->n_c = n_c;
    scm->n_s = n_s;
    scm->n_x = n_x;
    scm->n_yr = n_yr;
    scm->n_yt = widths;
    scm->p_c = (*rows_c)[digit[slot++]];
    scm->p_s.assign(n_s, 1.0 / static_cast<double>(n_s));
    scm->p_x_given_cs.resize(n_c * n_s * n_x);
    for (std::size_t cs = 0; cs < n_c * n_s; ++cs) {
      const auto& row = (*rows_x)[digit[slot++]];
      std::copy(row.begin(), row.end(),
                scm->p_x_given_cs.begin() + cs * n_x);
    }
    scm->p_yr_given_c.resize(n_c * n_yr);
    for (std::size_t c = 0; c < n_c; ++c) {
      const auto& row = (*rows_yr)[digit[slot++]];
      std::copy(row.begin(), row.end(), scm->p_yr_given_c.begin() + c * n_yr);
    }
    scm->tasks.assign(widths.size(), {});
    for (std::size_t t = 0; t < widths.size(); ++t) {
      scm->tasks[t].resize(n_yr * widths[t]);
      for (std::size_t r = 0; r < n_yr; ++r) {
        const auto& row = (*rows_t[t])[digit[slot++]];
        std::copy(row.begin(), row.end(),
                  scm->tasks[t].begin() + r * widths[t]);
      }
    }
    f->n_z = n_z;
    f->z_of_x.resize(n_x);
    for (std::size_t x = 0; x < n_x; ++x) {
      f->z_of_x[x] = digit[slot++];
    }
  }
};

}  // namespace

void enumerate_scms_grid(const GridLimits& limits, const ScmVisitor& visit) {
  // Simplex rows cached per width (widths used by any table).
  std::vector<std::vector<std::vector<double>>> rows_by_width(
      std::max({limits.max_c, limits.max_x, limits.max_yr, limits.max_yt}) + 1);
  auto rows_for = [&](std::size_t w) -> const std::vector<std::vector<double>>& {
    if (rows_by_width[w].empty()) {
      rows_by_width[w] = grid_simplex_rows(w, limits.grid);
    }
    return rows_by_width[w];
  };

  DiscreteSCM scm;
  RepresentationTable f;

  // Task-width combinations for a given task count, odometer order.
  auto for_each_width_combo =
      [&](std::size_t n_tasks, const std::function<void(const std::vector<std::size_t>&)>& fn) {
        std::vector<std::size_t> widths(n_tasks, 1);
        while (true) {
          fn(widths);
          std::size_t i = n_tasks;
          while (i-- > 0) {
            if (widths[i] < limits.max_yt) {
              ++widths[i];
              std::fill(widths.begin() + i + 1, widths.end(), 1);
              break;
            }
            if (i == 0) return;
          }
        }
      };

  for (std::size_t n_c = 1; n_c <= limits.max_c; ++n_c) {
    for (std::size_t n_s = 1; n_s <= limits.max_s; ++n_s) {
      for (std::size_t n_x = 1; n_x <= limits.max_x; ++n_x) {
        for (std::size_t n_yr = 1; n_yr <= limits.max_yr; ++n_yr) {
          for (std::size_t n_z = 1; n_z <= limits.max_z; ++n_z) {
            for (std::size_t n_tasks = 1; n_tasks <= limits.max_tasks; ++n_tasks) {
              for_each_width_combo(n_tasks, [&](const std::vector<std::size_t>& widths) {
                TupleSpace space;
                space.n_c = n_c;
                space.n_s = n_s;
                space.n_x = n_x;
                space.n_yr = n_yr;
                space.n_z = n_z;
                space.widths = widths;
                space.rows_c = &rows_for(n_c);
                space.rows_x = &rows_for(n_x);
                space.rows_yr = &rows_for(n_yr);
                space.radix.push_back(space.rows_c->size());
                for (std::size_t i = 0; i < n_c * n_s; ++i) {
                  space.radix.push_back(space.rows_x->size());
                }
                for (std::size_t i = 0; i < n_c; ++i) {
                  space.radix.push_back(space.rows_yr->size());
                }
                for (std::size_t w : widths) {
                  space.rows_t.push_back(&rows_for(w));
                  for (std::size_t r = 0; r < n_yr; ++r) {
                    space.radix.push_back(rows_for(w).size());
                  }
                }
                for (std::size_t x = 0; x < n_x; ++x) {
                  space.radix.push_back(n_z);
                }
                for (std::uint64_t r : space.radix) {
                  space.count = checked_mul(space.count, r);
                }

                const u128 budget = limits.budget_per_tuple;
                const u128 visits = space.count < budget ? space.count : budget;
                for (u128 i = 0; i < visits; ++i) {
                  const u128 index =
                      space.count <= budget ? i : (i * space.count) / budget;
                  space.decode(index, &scm, &f);
                  visit(scm, f);
                }
              });
            }
          }
        }
      }
    }
  }
}

namespace {

// Shared tallying for both sweep modes.
struct SweepTally {
  SweepResult result;
  double tol;
  std::function<void(std::uint64_t)> progress;

  void operator()(const DiscreteSCM& scm, const RepresentationTable& f) {
    const Theorem1Report report = verify_theorem1(scm, f, tol);
    ++result.models;
    if (report.antecedent.invariant) ++result.antecedent_true;
    bool skipped = report.antecedent.skipped_cells > 0;
    for (const auto& c : report.consequents) {
      skipped = skipped || c.skipped_cells > 0;
    }
    if (skipped) ++result.skipped_cell_models;
    if (report.violation) {
      ++result.violations;
      if (!result.first_counterexample) {
        result.first_counterexample = serialize_scm(scm, f);
      }
    }
    if (progress && result.models % 500000 == 0) progress(result.models);
  }
};

}  // namespace

SweepResult sweep_theorem1_grid(
    const GridLimits& limits, double tol,
    const std::function<void(std::uint64_t)>& progress) {
  SweepTally tally{{}, tol, progress};
  enumerate_scms_grid(limits,
                      [&tally](const DiscreteSCM& scm,
                               const RepresentationTable& f) { tally(scm, f); });
  return tally.result;
}

namespace {

// Random probability row; with probability ~0.3 some entries are forced to
// exactly 0 so zero-mass conditioning cells occur in the fuzz population.
std::vector<double> random_row(Rng& rng, std::size_t width) {
  std::vector<double> row(width);
  while (true) {
    for (double& v : row) {
      v = -std::log(1.0 - rng.uniform());  // Exp(1) -> flat Dirichlet
    }
    if (rng.uniform() < 0.3 && width > 1) {
      for (double& v : row) {
        if (rng.uniform() < 0.4) v = 0.0;
      }
    }
    double total = 0.0;
    for (double v : row) total += v;
    if (total <= 0.0) continue;
    for (double& v : row) v /= total;
    return row;
  }
}

}  // namespace

void enumerate_scms_fuzz(std::uint64_t n_models, std::uint64_t seed,
                         const GridLimits& limits, const ScmVisitor& visit) {
  Rng rng(seed);
  for (std::uint64_t i = 0; i < n_models; ++i) {
    DiscreteSCM scm;
    scm.n_c = 1 + rng.below(limits.max_c);
    scm.n_s = 1 + rng.below(limits.max_s);
    scm.n_x = 1 + rng.below(limits.max_x);
    scm.n_yr = 1 + rng.below(limits.max_yr);
    scm.p_c = random_row(rng, scm.n_c);
    scm.p_s.assign(scm.n_s, 1.0 / static_cast<double>(scm.n_s));
    scm.p_x_given_cs.clear();
    for (std::size_t cs = 0; cs < scm.n_c * scm.n_s; ++cs) {
      const auto row = random_row(rng, scm.n_x);
      scm.p_x_given_cs.insert(scm.p_x_given_cs.end(), row.begin(), row.end());
    }
    scm.p_yr_given_c.clear();
    for (std::size_t c = 0; c < scm.n_c; ++c) {
      const auto row = random_row(rng, scm.n_yr);
      scm.p_yr_given_c.insert(scm.p_yr_given_c.end(), row.begin(), row.end());
    }
    const std::size_t n_tasks = 1 + rng.below(limits.max_tasks);
    for (std::size_t t = 0; t < n_tasks; ++t) {
      const std::size_t w = 1 + rng.below(limits.max_yt);
      scm.n_yt.push_back(w);
      std::vector<double> mech;
      for (std::size_t r = 0; r < scm.n_yr; ++r) {
        const auto row = random_row(rng, w);
        mech.insert(mech.end(), row.begin(), row.end());
      }
      scm.tasks.push_back(std::move(mech));
    }
    RepresentationTable f;
    f.n_z = 1 + rng.below(limits.max_z);
    for (std::size_t x = 0; x < scm.n_x; ++x) {
      f.z_of_x.push_back(rng.below(f.n_z));
    }
    visit(scm, f);
  }
}

SweepResult sweep_theorem1_fuzz(std::uint64_t n_models, std::uint64_t seed,
                                const GridLimits& limits, double tol) {
  SweepTally tally{{}, tol, nullptr};
  enumerate_scms_fuzz(n_models, seed, limits,
                      [&tally](const DiscreteSCM& scm,
                               const RepresentationTable& f) { tally(scm, f); });
  return tally.result;
}

std::string serialize_scm(const DiscreteSCM& scm, const RepresentationTable& f) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "scm c=" << scm.n_c << " s=" << scm.n_s << " x=" << scm.n_x
     << " yr=" << scm.n_yr << " z=" << f.n_z << " tasks=" << scm.tasks.size()
     << "\n";
  auto row = [&os](const char* name, const double* p, std::size_t w) {
    os << name << ":";
    for (std::size_t i = 0; i < w; ++i) os << ' ' << p[i];
    os << "\n";
  };
  row("p_c", scm.p_c.data(), scm.n_c);
  row("p_s", scm.p_s.data(), scm.n_s);
  for (std::size_t c = 0; c < scm.n_c; ++c) {
    for (std::size_t s = 0; s < scm.n_s; ++s) {
      os << "p_x|c=" << c << ",s=" << s;
      row("", scm.p_x_given_cs.data() + (c * scm.n_s + s) * scm.n_x, scm.n_x);
    }
  }
  for (std::size_t c = 0; c < scm.n_c; ++c) {
    os << "p_yr|c=" << c;
    row("", scm.p_yr_given_c.data() + c * scm.n_yr, scm.n_yr);
  }
  for (std::size_t t = 0; t < scm.tasks.size(); ++t) {
    for (std::size_t r = 0; r < scm.n_yr; ++r) {
      os << "task" << t << "|yr=" << r;
      row("", scm.tasks[t].data() + r * scm.n_yt[t], scm.n_yt[t]);
    }
  }
  os << "f:";
  for (std::size_t z : f.z_of_x) os << ' ' << z;
  os << "\n";
  return os.str();
}

}  // namespace relic
