#include "feasregion/solver.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <queue>
#include <sstream>

#include "json.hpp"

namespace feasregion {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kPivotTol = 1e-9;
constexpr double kReducedCostTol = 1e-9;
constexpr double kFeasTol = 1e-7;
constexpr double kIntegralityTol = 1e-6;
constexpr long kPlateauRefreshInterval = 200;

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// How a model variable maps into standard-form columns.
struct ColMap {
  enum Kind { Fixed, Shifted, NegShifted, Split } kind = Fixed;
  int col = -1;       // primary column (or -1 for Fixed)
  int col_neg = -1;   // second column for Split
  double shift = 0.0; // Fixed: the value; Shifted: lower bound; NegShifted: upper bound
};

// Dense standard form: min c'y + c0 s.t. Ay = b (b >= 0 after negation), y >= 0.
struct StandardForm {
  int num_cols = 0;
  std::vector<std::vector<double>> A;
  std::vector<double> b;
  std::vector<double> c;
  double c0 = 0.0;
  std::vector<ColMap> col_map;       // per model variable
  std::vector<int> row_sign;         // +1/-1 per standard row vs. source row
  int num_model_rows = 0;            // standard rows 0..num_model_rows-1 mirror model rows
  std::vector<int> slack_col;        // per standard row, -1 if none
};

StandardForm build_standard_form(const SolverModel& model) {
  StandardForm sf;
  const int n = model.num_vars;
  sf.col_map.resize(n);

  int next_col = 0;
  for (int j = 0; j < n; ++j) {
    const double l = model.var_bounds[j].lower;
    const double u = model.var_bounds[j].upper;
    ColMap& cm = sf.col_map[j];
    if (std::isfinite(l) && std::isfinite(u) && u - l <= 1e-12) {
      cm.kind = ColMap::Fixed;
      cm.shift = l;
    } else if (!std::isfinite(l) && !std::isfinite(u)) {
      cm.kind = ColMap::Split;
      cm.col = next_col++;
      cm.col_neg = next_col++;
    } else if (std::isfinite(l)) {
      cm.kind = ColMap::Shifted;  // x = l + y, y >= 0 (upper bound handled by a row)
      cm.col = next_col++;
      cm.shift = l;
    } else {
      cm.kind = ColMap::NegShifted;  // x = u - y, y >= 0
      cm.col = next_col++;
      cm.shift = u;
    }
  }
  const int num_struct = next_col;

  // Objective over structural columns.
  sf.c.assign(num_struct, 0.0);
  for (int j = 0; j < n; ++j) {
    const ColMap& cm = sf.col_map[j];
    const double cj = model.objective[j];
    switch (cm.kind) {
      case ColMap::Fixed: sf.c0 += cj * cm.shift; break;
      case ColMap::Shifted: sf.c[cm.col] += cj; sf.c0 += cj * cm.shift; break;
      case ColMap::NegShifted: sf.c[cm.col] -= cj; sf.c0 += cj * cm.shift; break;
      case ColMap::Split: sf.c[cm.col] += cj; sf.c[cm.col_neg] -= cj; break;
    }
  }

  // Rows: model rows first, then upper-bound rows for boxed variables.
  struct RawRow { std::vector<double> a; Relation rel; double rhs; };
  std::vector<RawRow> raw;
  raw.reserve(model.rows.size() + static_cast<std::size_t>(n));
  for (const SolverRow& row : model.rows) {
    RawRow rr;
    rr.a.assign(num_struct, 0.0);
    rr.rhs = row.rhs;
    rr.rel = row.rel;
    for (int j = 0; j < n; ++j) {
      const double aij = row.coeffs[j];
      if (aij == 0.0) continue;
      const ColMap& cm = sf.col_map[j];
      switch (cm.kind) {
        case ColMap::Fixed: rr.rhs -= aij * cm.shift; break;
        case ColMap::Shifted: rr.a[cm.col] += aij; rr.rhs -= aij * cm.shift; break;
        case ColMap::NegShifted: rr.a[cm.col] -= aij; rr.rhs -= aij * cm.shift; break;
        case ColMap::Split: rr.a[cm.col] += aij; rr.a[cm.col_neg] -= aij; break;
      }
    }
    raw.push_back(std::move(rr));
  }
  sf.num_model_rows = static_cast<int>(raw.size());
  for (int j = 0; j < n; ++j) {
    const double l = model.var_bounds[j].lower;
    const double u = model.var_bounds[j].upper;
    if (std::isfinite(l) && std::isfinite(u) && u - l > 1e-12) {
      RawRow rr;
      rr.a.assign(num_struct, 0.0);
      rr.a[sf.col_map[j].col] = 1.0;
      rr.rel = Relation::LessEqual;
      rr.rhs = u - l;
      raw.push_back(std::move(rr));
    }
  }

  // Equalities with slack/surplus columns, rhs made nonnegative.
  const int m = static_cast<int>(raw.size());
  int num_slacks = 0;
  for (const RawRow& rr : raw)
    if (rr.rel != Relation::Equal) ++num_slacks;
  sf.num_cols = num_struct + num_slacks;
  sf.A.assign(m, std::vector<double>(sf.num_cols, 0.0));
  sf.b.assign(m, 0.0);
  sf.c.resize(sf.num_cols, 0.0);
  sf.slack_col.assign(m, -1);
  sf.row_sign.assign(m, 1);

  int slack = num_struct;
  for (int i = 0; i < m; ++i) {
    RawRow& rr = raw[i];
    std::copy(rr.a.begin(), rr.a.end(), sf.A[i].begin());
    double s_coeff = 0.0;
    if (rr.rel == Relation::LessEqual) s_coeff = 1.0;
    if (rr.rel == Relation::GreaterEqual) s_coeff = -1.0;
    if (s_coeff != 0.0) {
      sf.A[i][slack] = s_coeff;
      sf.slack_col[i] = slack;
      ++slack;
    }
    sf.b[i] = rr.rhs;
    if (sf.b[i] < 0.0) {
      for (double& v : sf.A[i]) v = -v;
      sf.b[i] = -sf.b[i];
      sf.row_sign[i] = -1;
    }
  }
  return sf;
}

// Dense tableau with explicit artificial columns for every row; artificials
// are priced out of phase 2, so their final columns carry the basis inverse.
struct Simplex {
  int m = 0;
  int total_cols = 0;  // structural+slack columns + m artificials
  int art_begin = 0;
  std::vector<std::vector<double>> T;  // m rows, total_cols + 1 (rhs last)
  std::vector<double> obj_row;         // phase-2 reduced costs, last = -value
  std::vector<double> phase1_row;
  std::vector<int> basis;
  std::vector<int> crash_sign;  // -1 where the stored row is the negated input
  std::vector<double> full_costs;          // structural+slack costs, artificials 0
  std::vector<std::vector<double>> pristine;  // exact initial tableau
  long iterations = 0;
  long degenerate_streak = 0;
  int refresh_budget = 12;   // verdict-time rebuilds
  int plateau_budget = 100;  // mid-plateau rebuilds
  // Plateau escape: deterministic pivot rules can revisit bases forever on a
  // massively degenerate vertex, and exact rebuilds cannot fix a rule that
  // walks in circles. While a plateau persists, entering and leaving choices
  // are randomized (fixed seed: runs stay reproducible), which breaks such
  // cycles almost surely; normal pricing resumes on real progress.
  bool scramble = false;
  std::uint64_t rng_state = 0x9E3779B97F4A7C15ull;

  std::uint64_t next_rand() {
    rng_state ^= rng_state << 13;
    rng_state ^= rng_state >> 7;
    rng_state ^= rng_state << 17;
    return rng_state;
  }

  explicit Simplex(const StandardForm& sf) {
    m = static_cast<int>(sf.A.size());
    art_begin = sf.num_cols;
    total_cols = sf.num_cols + m;
    T.assign(m, std::vector<double>(total_cols + 1, 0.0));
    crash_sign.assign(m, 1);
    for (int i = 0; i < m; ++i) {
      std::copy(sf.A[i].begin(), sf.A[i].end(), T[i].begin());
      T[i][art_begin + i] = 1.0;
      T[i][total_cols] = sf.b[i];
    }
    basis.resize(m);
    obj_row.assign(total_cols + 1, 0.0);
    phase1_row.assign(total_cols + 1, 0.0);

    // Initial basis: slack where it enters positively; a zero-rhs surplus row
    // is negated so its surplus can start basic instead of an artificial
    // (binding rows through the origin are pervasive here, and a basis full
    // of degenerate artificials makes phase 1 drift badly).
    std::vector<bool> art_needed(m, false);
    for (int i = 0; i < m; ++i) {
      const int sc = sf.slack_col[i];
      if (sc >= 0 && T[i][sc] > 0.5) {
        basis[i] = sc;
      } else if (sc >= 0 && sf.b[i] == 0.0) {
        for (int j = 0; j < art_begin; ++j) T[i][j] = -T[i][j];
        crash_sign[i] = -1;
        basis[i] = sc;
      } else {
        basis[i] = art_begin + i;
        art_needed[i] = true;
      }
    }
    pristine = T;
    full_costs.assign(total_cols, 0.0);
    for (int cidx = 0; cidx < sf.num_cols; ++cidx) full_costs[cidx] = sf.c[cidx];

    // Phase-1 reduced costs: cost 1 on artificials, eliminated for basic ones.
    for (int i = 0; i < m; ++i) phase1_row[art_begin + i] = 1.0;
    for (int i = 0; i < m; ++i) {
      if (!art_needed[i]) continue;
      for (int cidx = 0; cidx <= total_cols; ++cidx) phase1_row[cidx] -= T[i][cidx];
    }
    // Phase-2 reduced costs for the initial basis (slacks cost 0, artificials
    // excluded from pricing, so only structural costs matter).
    for (int cidx = 0; cidx < sf.num_cols; ++cidx) obj_row[cidx] = sf.c[cidx];
  }

  // Rebuilds the tableau exactly from the pristine copy under the current
  // basis, clearing accumulated roundoff, and reprices both phases. Returns
  // false (leaving the state untouched) when out of budget or the recorded
  // basis proves singular under partial pivoting. Verdict-time and
  // mid-plateau rebuilds draw on separate budgets so a long degenerate crawl
  // cannot starve the final optimality checks.
  bool refresh(bool verdict = true) {
    int& budget = verdict ? refresh_budget : plateau_budget;
    if (budget <= 0) return false;
    --budget;
    std::vector<std::vector<double>> F = pristine;
    std::vector<int> new_basis(m, -1);
    std::vector<char> used(m, 0);
    for (int step = 0; step < m; ++step) {
      const int cc = basis[step];
      int r = -1;
      double best = 1e-9;
      for (int i = 0; i < m; ++i) {
        if (!used[i]) {
          const double mag = std::abs(F[i][cc]);
          if (mag > best) {
            best = mag;
            r = i;
          }
        }
      }
      if (r < 0) return false;
      used[r] = 1;
      new_basis[r] = cc;
      const double inv = 1.0 / F[r][cc];
      for (double& v : F[r]) v *= inv;
      F[r][cc] = 1.0;
      for (int i = 0; i < m; ++i) {
        if (i == r) continue;
        const double f = F[i][cc];
        if (std::abs(f) < 1e-13) continue;
        for (int j = 0; j <= total_cols; ++j) F[i][j] -= f * F[r][j];
        F[i][cc] = 0.0;
      }
    }
    T = std::move(F);
    basis = std::move(new_basis);
    reprice(phase1_row, true);
    reprice(obj_row, false);
    degenerate_streak = 0;
    return true;
  }

  // Recomputes a reduced-cost row from the current (exact) tableau.
  void reprice(std::vector<double>& row, bool phase1) {
    row.assign(total_cols + 1, 0.0);
    for (int j = 0; j < total_cols; ++j)
      row[j] = phase1 ? (j >= art_begin ? 1.0 : 0.0) : full_costs[j];
    for (int i = 0; i < m; ++i) {
      const double cb = phase1 ? (basis[i] >= art_begin ? 1.0 : 0.0)
                               : (basis[i] < art_begin ? full_costs[basis[i]] : 0.0);
      if (cb == 0.0) continue;
      for (int j = 0; j <= total_cols; ++j) row[j] -= cb * T[i][j];
    }
    for (int i = 0; i < m; ++i) row[basis[i]] = 0.0;
  }

  void pivot(int r, int c) {
    const double p = T[r][c];
    std::vector<double>& Pr = T[r];
    const double inv = 1.0 / p;
    for (double& v : Pr) v *= inv;
    Pr[c] = 1.0;
    for (int i = 0; i < m; ++i) {
      if (i == r) continue;
      const double f = T[i][c];
      if (std::abs(f) < 1e-13) continue;
      std::vector<double>& Ri = T[i];
      for (int j = 0; j <= total_cols; ++j) Ri[j] -= f * Pr[j];
      Ri[c] = 0.0;
    }
    auto elim = [&](std::vector<double>& row) {
      const double f = row[c];
      if (std::abs(f) < 1e-13) return;
      for (int j = 0; j <= total_cols; ++j) row[j] -= f * Pr[j];
      row[c] = 0.0;
    };
    elim(obj_row);
    elim(phase1_row);
    basis[r] = c;
    ++iterations;
  }

  // Entering column: most negative reduced cost, or — while escaping a
  // plateau — a uniformly random improving column (reservoir sample).
  // allow_artificials is false in phase 2.
  int price(const std::vector<double>& cost, bool allow_artificials) {
    const int limit = allow_artificials ? total_cols : art_begin;
    if (scramble) {
      int count = 0;
      int pick = -1;
      for (int j = 0; j < limit; ++j) {
        if (cost[j] < -kReducedCostTol) {
          ++count;
          if (next_rand() % static_cast<std::uint64_t>(count) == 0) pick = j;
        }
      }
      return pick;
    }
    int best = -1;
    double best_val = -kReducedCostTol;
    for (int j = 0; j < limit; ++j) {
      const double rc = cost[j];
      if (rc < best_val) {
        best_val = rc;
        best = j;
      }
    }
    return best;
  }

  // Leaving row by ratio test. Ties within a small window take the largest
  // pivot magnitude: a near-tolerance pivot scales its row by up to 1e9 and
  // wrecks the basis, so stability beats any tie-order refinement. While
  // escaping a plateau the choice is randomized among ties whose pivots are
  // within a decade of the largest, trading a little stability for the cycle
  // break without ever admitting a catastrophic pivot.
  int ratio_row(int c) {
    int best = -1;
    double best_ratio = kInf;
    for (int i = 0; i < m; ++i) {
      const double a = T[i][c];
      if (a > kPivotTol) {
        const double ratio = T[i][total_cols] / a;
        if (best < 0) {
          best_ratio = ratio;
          best = i;
          continue;
        }
        const double window = 1e-9 * (1.0 + std::abs(best_ratio));
        if (ratio < best_ratio - window) {
          best_ratio = ratio;
          best = i;
        } else if (ratio < best_ratio + window && std::abs(a) > std::abs(T[best][c])) {
          best_ratio = std::min(best_ratio, ratio);
          best = i;
        }
      }
    }
    if (!scramble || best < 0) return best;
    const double window = 1e-9 * (1.0 + std::abs(best_ratio));
    const double floor_a = 0.1 * std::abs(T[best][c]);
    int count = 0;
    int pick = best;
    for (int i = 0; i < m; ++i) {
      const double a = T[i][c];
      if (a > kPivotTol && std::abs(a) >= floor_a &&
          T[i][total_cols] / a < best_ratio + window) {
        ++count;
        if (next_rand() % static_cast<std::uint64_t>(count) == 0) pick = i;
      }
    }
    return pick;
  }

  // Runs one phase until a verdict survives an exact tableau rebuild:
  // whenever pricing or the ratio test wants to stop, the tableau is
  // refreshed from pristine data and the verdict re-checked, so accumulated
  // roundoff cannot end a phase early. Returns Optimal/Unbounded/IterationLimit.
  SolveStatus run(std::vector<double>& cost, bool allow_artificials, long iteration_cap) {
    double last_value = cost[total_cols];
    while (true) {
      if (std::getenv("FR_LPTRACE") && iterations > 0 && iterations % 5000 == 0)
        std::fprintf(stderr, "[lp] it=%ld phase%d value=%.12g streak=%ld\n", iterations,
                     allow_artificials ? 1 : 2, -cost[total_cols], degenerate_streak);
      if (iterations >= iteration_cap) return SolveStatus::IterationLimit;
      const int c = price(cost, allow_artificials);
      if (c < 0) {
        if (refresh()) {
          if (price(cost, allow_artificials) < 0) return SolveStatus::Optimal;
          continue;  // drift had hidden an improving column
        }
        return SolveStatus::Optimal;
      }
      const int r = ratio_row(c);
      if (r < 0) {
        if (refresh()) continue;  // re-derive the column before giving up
        return SolveStatus::Unbounded;
      }
      pivot(r, c);
      const double value = cost[total_cols];
      // Plateau detection must be relative: per-pivot roundoff jitters the
      // value in its last digit, and an absolute test would read that as
      // progress forever. On a plateau, drifted reduced costs manufacture
      // phantom improving columns that keep the verdict path unreachable,
      // so rebuild exactly at intervals until the plateau resolves.
      if (std::abs(value - last_value) <= 1e-9 * (1.0 + std::abs(value))) {
        if (++degenerate_streak >= kPlateauRefreshInterval) {
          scramble = true;
          refresh(false);
          degenerate_streak = 0;
        }
      } else {
        degenerate_streak = 0;
        scramble = false;
      }
      last_value = value;
    }
  }
};

SolverResult solve_lp_standard(const SolverModel& model, const StandardForm& sf,
                               const SolverOptions& options) {
  SolverResult res;
  Simplex sx(sf);

  SolveStatus st = sx.run(sx.phase1_row, true, options.lp_iteration_cap);
  res.iterations = sx.iterations;
  if (st == SolveStatus::IterationLimit) {
    res.status = st;
    return res;
  }
  const double phase1_value = -sx.phase1_row[sx.total_cols];
  if (phase1_value > kFeasTol) {
    res.status = SolveStatus::Infeasible;
    return res;
  }
  // Drive basic artificials out where a nonartificial pivot exists; redundant
  // rows keep a zero-valued artificial that can never re-enter.
  for (int i = 0; i < sx.m; ++i) {
    if (sx.basis[i] < sx.art_begin) continue;
    for (int j = 0; j < sx.art_begin; ++j) {
      if (std::abs(sx.T[i][j]) > 1e-7) {
        sx.pivot(i, j);
        break;
      }
    }
  }

  st = sx.run(sx.obj_row, false, options.lp_iteration_cap);
  res.iterations = sx.iterations;
  if (st != SolveStatus::Optimal) {
    res.status = st;
    return res;
  }

  // Recover x from the basis.
  std::vector<double> y(sf.num_cols, 0.0);
  for (int i = 0; i < sx.m; ++i) {
    if (sx.basis[i] < sf.num_cols) y[sx.basis[i]] = sx.T[i][sx.total_cols];
  }
  res.solution.assign(model.num_vars, 0.0);
  for (int j = 0; j < model.num_vars; ++j) {
    const ColMap& cm = sf.col_map[j];
    switch (cm.kind) {
      case ColMap::Fixed: res.solution[j] = cm.shift; break;
      case ColMap::Shifted: res.solution[j] = cm.shift + y[cm.col]; break;
      case ColMap::NegShifted: res.solution[j] = cm.shift - y[cm.col]; break;
      case ColMap::Split: res.solution[j] = y[cm.col] - y[cm.col_neg]; break;
    }
  }
  res.objective_value = dot(model.objective, res.solution);
  res.status = SolveStatus::Optimal;

  // Duals from the artificial columns (they carry the basis inverse):
  // lambda_i = c_B . B^{-1} e_i. Strong duality check value b'lambda + c0.
  std::vector<double> std_costs(sx.total_cols, 0.0);
  for (int j = 0; j < sf.num_cols; ++j) std_costs[j] = sf.c[j];
  std::vector<double> lambda(sx.m, 0.0);
  for (int i = 0; i < sx.m; ++i) {
    double v = 0.0;
    for (int r = 0; r < sx.m; ++r) v += std_costs[sx.basis[r]] * sx.T[r][sx.art_begin + i];
    lambda[i] = v;
  }
  res.dual_objective = sf.c0;
  for (int i = 0; i < sx.m; ++i) res.dual_objective += lambda[i] * sf.b[i];
  res.row_duals.assign(sf.num_model_rows, 0.0);
  for (int i = 0; i < sf.num_model_rows; ++i)
    res.row_duals[i] = lambda[i] * static_cast<double>(sf.row_sign[i]) *
                       static_cast<double>(sx.crash_sign[i]);
  return res;
}

}  // namespace

std::string to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal: return "Optimal";
    case SolveStatus::Infeasible: return "Infeasible";
    case SolveStatus::Unbounded: return "Unbounded";
    case SolveStatus::IterationLimit: return "IterationLimit";
  }
  return "Unknown";
}

std::string to_string(Relation r) {
  switch (r) {
    case Relation::GreaterEqual: return ">=";
    case Relation::LessEqual: return "<=";
    case Relation::Equal: return "==";
  }
  return "?";
}

SolverModel SolverModel::with_free_vars(int n) {
  SolverModel m;
  m.num_vars = n;
  m.objective.assign(n, 0.0);
  m.var_bounds.assign(n, VarBounds{-kInf, kInf});
  m.integrality.assign(n, 0);
  return m;
}

void SolverModel::add_row(std::vector<double> coeffs, Relation rel, double rhs) {
  rows.push_back(SolverRow{std::move(coeffs), rel, rhs});
}

void validate_model(const SolverModel& model) {
  const std::size_t n = static_cast<std::size_t>(model.num_vars);
  if (model.num_vars < 0) throw DimensionError("model has negative num_vars");
  if (model.objective.size() != n)
    throw DimensionError("objective length does not match num_vars");
  if (model.var_bounds.size() != n)
    throw DimensionError("var_bounds length does not match num_vars");
  if (model.integrality.size() != n)
    throw DimensionError("integrality length does not match num_vars");
  if (model.quadratic_diag && model.quadratic_diag->size() != n)
    throw DimensionError("quadratic_diag length does not match num_vars");
  if (model.quadratic_diag) {
    for (double q : *model.quadratic_diag)
      if (q < 0.0) throw DimensionError("quadratic_diag must be entrywise nonnegative");
  }
  for (std::size_t i = 0; i < model.rows.size(); ++i) {
    if (model.rows[i].coeffs.size() != n)
      throw DimensionError("row " + std::to_string(i) + " width does not match num_vars");
  }
  for (std::size_t j = 0; j < n; ++j) {
    const VarBounds& b = model.var_bounds[j];
    if (b.lower > b.upper)
      throw DimensionError("variable " + std::to_string(j) + " has lower > upper");
    if (model.integrality[j] && (b.lower < -1e-9 || b.upper > 1.0 + 1e-9))
      throw DimensionError("binary variable " + std::to_string(j) + " must be bounded in [0,1]");
  }
}

SolverResult solve_lp(const SolverModel& model, const SolverOptions& options) {
  validate_model(model);
  for (std::uint8_t f : model.integrality)
    if (f) throw Error("solve_lp: model carries integrality flags; use solve_milp");
  if (model.quadratic_diag)
    throw Error("solve_lp: model carries a quadratic objective; use solve_qp_activeset");
  const StandardForm sf = build_standard_form(model);
  return solve_lp_standard(model, sf, options);
}

namespace {

struct BnbNode {
  double bound = 0.0;
  int depth = 0;
  long id = 0;
  std::vector<std::pair<int, double>> fixes;
  std::vector<double> relax_solution;
};

struct NodeOrder {
  bool operator()(const BnbNode& a, const BnbNode& b) const {
    if (a.bound != b.bound) return a.bound > b.bound;  // lower bound first
    if (a.depth != b.depth) return a.depth < b.depth;  // deeper first on ties
    return a.id > b.id;
  }
};

}  // namespace

SolverResult solve_milp(const SolverModel& model, const SolverOptions& options) {
  validate_model(model);
  if (model.quadratic_diag)
    throw Error("solve_milp: quadratic objectives are not supported");

  std::vector<int> bin_vars;
  for (int j = 0; j < model.num_vars; ++j)
    if (model.integrality[j]) bin_vars.push_back(j);

  SolverModel relax = model;
  relax.integrality.assign(model.integrality.size(), 0);

  auto solve_node = [&](const std::vector<std::pair<int, double>>& fixes) {
    SolverModel node = relax;
    for (const auto& [var, val] : fixes) node.var_bounds[var] = VarBounds{val, val};
    return solve_lp(node, options);
  };

  SolverResult total;
  long next_id = 0;
  long nodes = 0;
  long iterations = 0;

  std::priority_queue<BnbNode, std::vector<BnbNode>, NodeOrder> open;

  SolverResult root = solve_node({});
  ++nodes;
  iterations += root.iterations;
  if (root.status == SolveStatus::Infeasible || root.status == SolveStatus::Unbounded ||
      root.status == SolveStatus::IterationLimit) {
    total = root;
    total.node_count = nodes;
    total.iterations = iterations;
    total.row_duals.clear();
    return total;
  }

  bool have_incumbent = false;
  double incumbent_obj = kInf;
  std::vector<double> incumbent_sol;

  BnbNode root_node;
  root_node.bound = root.objective_value;
  root_node.id = next_id++;
  root_node.relax_solution = std::move(root.solution);
  open.push(std::move(root_node));

  bool hit_cap = false;

  while (!open.empty()) {
    BnbNode node = open.top();
    open.pop();
    if (have_incumbent && node.bound >= incumbent_obj - 1e-9) continue;

    // Most fractional binary, ties to the lowest index.
    int branch_var = -1;
    double branch_score = kIntegralityTol;
    for (int j : bin_vars) {
      const double v = node.relax_solution[j];
      const double frac = std::min(v - std::floor(v), std::ceil(v) - v);
      const double dist = std::min(std::abs(v), std::abs(1.0 - v));
      const double score = std::min(frac, dist);
      if (score > branch_score) {
        branch_score = score;
        branch_var = j;
      }
    }
    if (branch_var < 0) {
      // Integral: candidate incumbent (snap binaries exactly).
      double obj = node.bound;
      if (!have_incumbent || obj < incumbent_obj - 1e-9) {
        have_incumbent = true;
        incumbent_obj = obj;
        incumbent_sol = node.relax_solution;
        for (int j : bin_vars) incumbent_sol[j] = std::round(incumbent_sol[j]);
      }
      continue;
    }

    for (double val : {0.0, 1.0}) {
      if (nodes >= options.node_cap) {
        hit_cap = true;
        break;
      }
      auto fixes = node.fixes;
      fixes.emplace_back(branch_var, val);
      SolverResult child = solve_node(fixes);
      ++nodes;
      iterations += child.iterations;
      if (std::getenv("FR_MILPTRACE") && nodes % 500 == 0)
        std::fprintf(stderr,
                     "[milp] nodes=%ld open=%zu depth=%d bound=%.9g incumbent=%.9g childit=%ld\n",
                     nodes, open.size(), node.depth, node.bound,
                     have_incumbent ? incumbent_obj : kInf, child.iterations);
      if (child.status == SolveStatus::IterationLimit) {
        if (std::getenv("FR_MILPTRACE"))
          std::fprintf(stderr, "[milp] child LP iteration limit at node %ld depth %d\n",
                       nodes, node.depth + 1);
        hit_cap = true;
        break;
      }
      if (child.status != SolveStatus::Optimal) continue;  // pruned infeasible
      if (have_incumbent && child.objective_value >= incumbent_obj - 1e-9) continue;
      BnbNode c;
      c.bound = child.objective_value;
      c.depth = node.depth + 1;
      c.id = next_id++;
      c.fixes = std::move(fixes);
      c.relax_solution = std::move(child.solution);
      open.push(std::move(c));
    }
    if (hit_cap) break;
  }

  total.node_count = nodes;
  total.iterations = iterations;
  if (hit_cap) {
    total.status = SolveStatus::IterationLimit;
    return total;
  }
  if (!have_incumbent) {
    total.status = SolveStatus::Infeasible;
    return total;
  }
  total.status = SolveStatus::Optimal;
  total.solution = std::move(incumbent_sol);
  total.objective_value = incumbent_obj;
  return total;
}

SolverResult solve_qp_activeset(const SolverModel& model, const SolverOptions& options) {
  validate_model(model);
  if (!model.quadratic_diag)
    throw Error("solve_qp_activeset: model has no quadratic objective");
  for (std::uint8_t f : model.integrality)
    if (f) throw Error("solve_qp_activeset: integrality flags are not supported");

  const int n = model.num_vars;

  // Normalize everything to g'x >= r inequalities plus equalities, folding in
  // finite variable bounds as rows.
  struct Ineq { std::vector<double> g; double r; };
  std::vector<Ineq> ineqs;
  std::vector<Ineq> eqs;
  for (const SolverRow& row : model.rows) {
    Ineq q{row.coeffs, row.rhs};
    if (row.rel == Relation::Equal) {
      eqs.push_back(std::move(q));
    } else if (row.rel == Relation::GreaterEqual) {
      ineqs.push_back(std::move(q));
    } else {
      for (double& v : q.g) v = -v;
      q.r = -q.r;
      ineqs.push_back(std::move(q));
    }
  }
  for (int j = 0; j < n; ++j) {
    const VarBounds& b = model.var_bounds[j];
    if (std::isfinite(b.lower)) {
      Ineq q{std::vector<double>(n, 0.0), b.lower};
      q.g[j] = 1.0;
      ineqs.push_back(std::move(q));
    }
    if (std::isfinite(b.upper)) {
      Ineq q{std::vector<double>(n, 0.0), -b.upper};
      q.g[j] = -1.0;
      ineqs.push_back(std::move(q));
    }
  }

  if (n > 16 || static_cast<int>(ineqs.size()) > 24)
    throw SizeGuardError(
        "solve_qp_activeset: instance exceeds the enumeration guard (16 variables, "
        "24 inequality rows); use the L1 distance path for larger instances");

  const int mi = static_cast<int>(ineqs.size());
  const int me = static_cast<int>(eqs.size());
  const std::vector<double>& qd = *model.quadratic_diag;

  auto primal_feasible = [&](const Eigen::VectorXd& x) {
    for (const Ineq& q : ineqs) {
      double v = -q.r;
      for (int j = 0; j < n; ++j) v += q.g[j] * x[j];
      if (v < -kFeasTol) return false;
    }
    for (const Ineq& q : eqs) {
      double v = -q.r;
      for (int j = 0; j < n; ++j) v += q.g[j] * x[j];
      if (std::abs(v) > kFeasTol) return false;
    }
    return true;
  };

  bool found = false;
  double best_obj = kInf;
  Eigen::VectorXd best_x;

  std::vector<int> subset;
  // Enumerates subsets of inequality rows by size then lexicographically.
  auto try_subset = [&](const std::vector<int>& act) {
    const int k = me + static_cast<int>(act.size());
    const int dim = n + k;
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(dim, dim);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(dim);
    for (int j = 0; j < n; ++j) {
      K(j, j) = 2.0 * qd[j];
      rhs[j] = -model.objective[j];
    }
    int row = n;
    auto put = [&](const Ineq& q) {
      for (int j = 0; j < n; ++j) {
        K(row, j) = q.g[j];
        K(j, row) = -q.g[j];
      }
      rhs[row] = q.r;
      ++row;
    };
    for (const Ineq& q : eqs) put(q);
    for (int idx : act) put(ineqs[idx]);

    Eigen::FullPivLU<Eigen::MatrixXd> lu(K);
    if (!lu.isInvertible()) return;
    Eigen::VectorXd sol = lu.solve(rhs);
    Eigen::VectorXd x = sol.head(n);
    // Multipliers for the chosen inequalities must be nonnegative.
    for (std::size_t t = 0; t < act.size(); ++t) {
      if (sol[n + me + static_cast<int>(t)] < -kReducedCostTol) return;
    }
    if (!primal_feasible(x)) return;
    double obj = 0.0;
    for (int j = 0; j < n; ++j) obj += qd[j] * x[j] * x[j] + model.objective[j] * x[j];
    if (!found || obj < best_obj - 1e-12) {
      found = true;
      best_obj = obj;
      best_x = x;
    }
  };

  const int max_active = std::max(0, n - me);
  std::vector<int> idx;
  // Size-ordered subset enumeration without recursion depth concerns.
  std::vector<std::vector<int>> stack;
  for (int size = 0; size <= std::min(max_active, mi); ++size) {
    idx.assign(size, 0);
    for (int i = 0; i < size; ++i) idx[i] = i;
    if (size == 0) {
      try_subset({});
      continue;
    }
    if (size > mi) break;
    while (true) {
      try_subset(idx);
      int i = size - 1;
      while (i >= 0 && idx[i] == mi - size + i) --i;
      if (i < 0) break;
      ++idx[i];
      for (int t = i + 1; t < size; ++t) idx[t] = idx[t - 1] + 1;
    }
  }

  SolverResult res;
  if (!found) {
    // Either infeasible or (for semidefinite diagonals) unbounded; classify
    // with a feasibility LP.
    SolverModel feas = model;
    feas.quadratic_diag.reset();
    feas.objective.assign(static_cast<std::size_t>(n), 0.0);
    SolverResult f = solve_lp(feas, options);
    res.status = (f.status == SolveStatus::Optimal) ? SolveStatus::Unbounded
                                                    : SolveStatus::Infeasible;
    return res;
  }
  res.status = SolveStatus::Optimal;
  res.solution.assign(best_x.data(), best_x.data() + n);
  res.objective_value = best_obj;
  return res;
}

std::string model_to_json(const SolverModel& model) {
  nlohmann::ordered_json j;
  j["num_vars"] = model.num_vars;
  j["objective"] = model.objective;
  if (model.quadratic_diag) j["quadratic_diag"] = *model.quadratic_diag;
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const SolverRow& r : model.rows) {
    nlohmann::ordered_json row;
    row["coeffs"] = r.coeffs;
    row["rel"] = to_string(r.rel);
    row["rhs"] = r.rhs;
    rows.push_back(std::move(row));
  }
  j["rows"] = std::move(rows);
  nlohmann::ordered_json bounds = nlohmann::ordered_json::array();
  for (const VarBounds& b : model.var_bounds) {
    nlohmann::ordered_json e;
    e["lower"] = std::isfinite(b.lower) ? nlohmann::ordered_json(b.lower)
                                        : nlohmann::ordered_json(nullptr);
    e["upper"] = std::isfinite(b.upper) ? nlohmann::ordered_json(b.upper)
                                        : nlohmann::ordered_json(nullptr);
    bounds.push_back(std::move(e));
  }
  j["var_bounds"] = std::move(bounds);
  std::vector<int> integ(model.integrality.begin(), model.integrality.end());
  j["integrality"] = integ;
  return j.dump(2);
}

}  // namespace feasregion
