#include "feasregion/imputation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace feasregion {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kFeasTol = 1e-7;
constexpr double kPinTol = 1e-9;      // slack on pinned optima during refinement
constexpr double kStepTol = 1e-7;     // slack absorbing solver drift when a
                                      // refinement step pins one coordinate
constexpr double kCoverTol = 1e-9;    // "achieves the per-observation minimum"
constexpr double kAuditMargin = 1e-6; // relaxed distances must stay this far under M

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Appends `count` variables to a model, widening existing rows with zeros.
int add_vars(SolverModel& m, int count, double lower, double upper, bool integral) {
  const int first = m.num_vars;
  m.num_vars += count;
  m.objective.resize(static_cast<std::size_t>(m.num_vars), 0.0);
  m.var_bounds.resize(static_cast<std::size_t>(m.num_vars), VarBounds{lower, upper});
  m.integrality.resize(static_cast<std::size_t>(m.num_vars),
                       static_cast<std::uint8_t>(integral ? 1 : 0));
  for (SolverRow& row : m.rows) row.coeffs.resize(static_cast<std::size_t>(m.num_vars), 0.0);
  return first;
}

std::vector<double> zero_coeffs(const SolverModel& m) {
  return std::vector<double>(static_cast<std::size_t>(m.num_vars), 0.0);
}

// A linear expression over model variables, used as a stage objective and as
// the left-hand side of a stage pin.
struct LinExpr {
  std::vector<std::pair<int, double>> terms;
};

void set_objective(SolverModel& m, const LinExpr& e) {
  std::fill(m.objective.begin(), m.objective.end(), 0.0);
  for (const auto& [idx, coeff] : e.terms) m.objective[static_cast<std::size_t>(idx)] += coeff;
}

void pin_expr(SolverModel& m, const LinExpr& e, double bound) {
  if (e.terms.empty()) return;
  std::vector<double> coeffs = zero_coeffs(m);
  for (const auto& [idx, coeff] : e.terms) coeffs[static_cast<std::size_t>(idx)] += coeff;
  m.add_row(std::move(coeffs), Relation::LessEqual, bound);
}

SolverResult solve_auto(const SolverModel& m, const SolverOptions& options) {
  for (std::uint8_t f : m.integrality)
    if (f) return solve_milp(m, options);
  return solve_lp(m, options);
}

[[noreturn]] void throw_solver_failure(SolveStatus status, const std::string& what) {
  switch (status) {
    case SolveStatus::IterationLimit:
      throw Error(what + ": solver hit its iteration/node cap; raise the cap or "
                         "simplify the instance");
    case SolveStatus::Infeasible:
      throw InfeasibleImputation(what + ": no admissible row exists (side "
                                        "constraints contradict feasibility)");
    case SolveStatus::Unbounded:
      throw Error(what + ": subproblem unbounded (malformed instance)");
    default:
      throw Error(what + ": unexpected solver status");
  }
}

SolverResult require_optimal(SolverResult r, const std::string& what) {
  if (r.status != SolveStatus::Optimal) throw_solver_failure(r.status, what);
  return r;
}

// ---------------------------------------------------------------------------
// Single-row models: variables (a, b) for one unknown row, with the
// normalization either fixed to a sign branch (sum-proxy) or encoded with
// split variables and sign binaries (l1-exact).
// ---------------------------------------------------------------------------

struct RowVars {
  int a0 = 0;  // a_j at a0 + j
  int b = 0;
  int p0 = -1, q0 = -1, s0 = -1;  // l1-exact split blocks
};

// sigma: +1 or -1 selects the sum-proxy branch; ignored under l1-exact.
// side_row_index: unknown-row index whose side constraints apply (-1: none).
SolverModel make_row_model(const ProblemInstance& p, int sigma, int side_row_index,
                           RowVars& v) {
  const int n = p.n;
  SolverModel m = SolverModel::with_free_vars(n + 1);
  v = RowVars{};
  v.a0 = 0;
  v.b = n;

  if (p.normalization == NormalizationScheme::SumProxy) {
    std::vector<double> norm(static_cast<std::size_t>(n + 1), 0.0);
    for (int j = 0; j < n; ++j) norm[static_cast<std::size_t>(j)] = 1.0;
    m.add_row(std::move(norm), Relation::Equal, static_cast<double>(sigma));
  } else {
    v.p0 = add_vars(m, n, 0.0, 1.0, false);
    v.q0 = add_vars(m, n, 0.0, 1.0, false);
    v.s0 = add_vars(m, n, 0.0, 1.0, true);
    for (int j = 0; j < n; ++j) {
      std::vector<double> split = zero_coeffs(m);
      split[static_cast<std::size_t>(v.a0 + j)] = 1.0;
      split[static_cast<std::size_t>(v.p0 + j)] = -1.0;
      split[static_cast<std::size_t>(v.q0 + j)] = 1.0;
      m.add_row(std::move(split), Relation::Equal, 0.0);
    }
    std::vector<double> unit = zero_coeffs(m);
    for (int j = 0; j < n; ++j) {
      unit[static_cast<std::size_t>(v.p0 + j)] = 1.0;
      unit[static_cast<std::size_t>(v.q0 + j)] = 1.0;
    }
    m.add_row(std::move(unit), Relation::Equal, 1.0);
    for (int j = 0; j < n; ++j) {
      std::vector<double> ps = zero_coeffs(m);
      ps[static_cast<std::size_t>(v.p0 + j)] = 1.0;
      ps[static_cast<std::size_t>(v.s0 + j)] = -1.0;
      m.add_row(std::move(ps), Relation::LessEqual, 0.0);
      std::vector<double> qs = zero_coeffs(m);
      qs[static_cast<std::size_t>(v.q0 + j)] = 1.0;
      qs[static_cast<std::size_t>(v.s0 + j)] = 1.0;
      m.add_row(std::move(qs), Relation::LessEqual, 1.0);
    }
  }

  for (const std::vector<double>& x : p.obs.points) {
    std::vector<double> feas = zero_coeffs(m);
    for (int j = 0; j < n; ++j) feas[static_cast<std::size_t>(v.a0 + j)] = x[static_cast<std::size_t>(j)];
    feas[static_cast<std::size_t>(v.b)] = -1.0;
    m.add_row(std::move(feas), Relation::GreaterEqual, 0.0);
  }

  if (side_row_index >= 0) {
    for (const SideConstraint& sc : p.side_constraints) {
      if (sc.row_index != side_row_index) continue;
      std::vector<double> row = zero_coeffs(m);
      for (int j = 0; j < n; ++j) row[static_cast<std::size_t>(v.a0 + j)] = sc.coeff_a[static_cast<std::size_t>(j)];
      row[static_cast<std::size_t>(v.b)] = sc.coeff_b;
      m.add_row(std::move(row), sc.rel, sc.rhs);
    }
  }
  return m;
}

LinExpr row_total_slack_expr(const ProblemInstance& p, const RowVars& v) {
  LinExpr e;
  const int K = static_cast<int>(p.obs.points.size());
  for (int j = 0; j < p.n; ++j) {
    double s = 0.0;
    for (const std::vector<double>& x : p.obs.points) s += x[static_cast<std::size_t>(j)];
    e.terms.emplace_back(v.a0 + j, s);
  }
  e.terms.emplace_back(v.b, -static_cast<double>(K));
  return e;
}

LinExpr row_slack_at_expr(const ProblemInstance& p, const RowVars& v, int k) {
  LinExpr e;
  const std::vector<double>& x = p.obs.points[static_cast<std::size_t>(k)];
  for (int j = 0; j < p.n; ++j) e.terms.emplace_back(v.a0 + j, x[static_cast<std::size_t>(j)]);
  e.terms.emplace_back(v.b, -1.0);
  return e;
}

struct RowSolution {
  std::vector<double> a;
  double b = 0.0;
  double objective = 0.0;
  int sigma = 0;
  long nodes = 0;
  long iterations = 0;
};

// Deterministic representative of an optimal face: freeze any binaries, pin
// the objective, then in order minimize each coefficient and maximize b.
// Bound boxes keep every refinement LP bounded; they are generous enough to
// contain the incumbent and only shape which optimum is reported.
RowSolution refine_row(SolverModel m, const RowVars& v, int n,
                       const SolverResult& opt, const ImputeOptions& options) {
  std::vector<double> current = opt.solution;
  bool has_bin = false;
  for (std::size_t j = 0; j < m.integrality.size(); ++j) {
    if (m.integrality[j]) {
      has_bin = true;
      const double val = std::round(current[j]);
      m.var_bounds[j] = VarBounds{val, val};
    }
  }
  if (has_bin) std::fill(m.integrality.begin(), m.integrality.end(), 0);

  double box = 1.0;
  for (double x : current) box = std::max(box, std::abs(x));
  box = 1000.0 * (box + 1.0);
  for (int j = 0; j <= n; ++j) {
    const int var = (j < n) ? v.a0 + j : v.b;
    VarBounds& bb = m.var_bounds[static_cast<std::size_t>(var)];
    bb.lower = std::max(bb.lower, -box);
    bb.upper = std::min(bb.upper, box);
  }

  bool objective_nonzero = false;
  for (double c : m.objective)
    if (c != 0.0) objective_nonzero = true;
  if (objective_nonzero) {
    std::vector<double> pin = m.objective;
    pin.resize(static_cast<std::size_t>(m.num_vars), 0.0);
    m.add_row(std::move(pin), Relation::LessEqual, opt.objective_value + kPinTol);
  }

  long iters = opt.iterations;
  // Pinning the stepped coordinate through its bounds (rather than a pin row
  // a hair away from it) keeps the basis well-conditioned as steps stack up;
  // the one-sided kStepTol slack absorbs the solver's arithmetic drift.
  auto step = [&](int var, bool minimize) {
    std::fill(m.objective.begin(), m.objective.end(), 0.0);
    m.objective[static_cast<std::size_t>(var)] = minimize ? 1.0 : -1.0;
    SolverResult r = require_optimal(solve_lp(m, options.solver), "row refinement");
    iters += r.iterations;
    VarBounds& bb = m.var_bounds[static_cast<std::size_t>(var)];
    const double val = r.solution[static_cast<std::size_t>(var)];
    if (minimize)
      bb.upper = std::min(bb.upper, val + kStepTol);
    else
      bb.lower = std::max(bb.lower, val - kStepTol);
    current = std::move(r.solution);
  };
  for (int j = 0; j < n; ++j) step(v.a0 + j, true);
  step(v.b, false);

  RowSolution out;
  out.a.assign(current.begin() + v.a0, current.begin() + v.a0 + n);
  out.b = current[static_cast<std::size_t>(v.b)];
  out.objective = opt.objective_value;
  out.nodes = opt.node_count;
  out.iterations = iters;
  return out;
}

ConstraintRow to_normalized_row(const std::vector<double>& a, double b,
                                NormalizationScheme scheme) {
  return normalize_row(ConstraintRow{a, b, NormalizationTag::none()}, scheme);
}

// Solver arithmetic can leave an offset a hair above the tightest
// observation. Given fixed coefficients the largest valid offset is exactly
// that minimum, so snapping down loses nothing, restores exact feasibility,
// and must run before the loss is evaluated on the rows.
void snap_offsets(const ProblemInstance& p, std::vector<ConstraintRow>& rows) {
  for (ConstraintRow& r : rows) {
    double lo = kInf;
    for (const std::vector<double>& x : p.obs.points) lo = std::min(lo, dot(r.a, x));
    if (r.b > lo) r.b = lo;
  }
}

// ---------------------------------------------------------------------------
// Joint models over all m1 unknown rows.
// ---------------------------------------------------------------------------

struct Joint {
  SolverModel model;
  int n = 0, m1 = 0, K = 0;
  NormalizationScheme scheme = NormalizationScheme::SumProxy;
  int z0 = -1;                    // sum-proxy sign binaries
  int p0 = -1, q0 = -1, s0 = -1;  // l1-exact blocks (row-major, m1 x n)

  int a(int i, int j) const { return i * (n + 1) + j; }
  int b(int i) const { return i * (n + 1) + n; }
};

Joint make_joint_base(const ProblemInstance& p) {
  Joint J;
  J.n = p.n;
  J.m1 = p.m1;
  J.K = static_cast<int>(p.obs.points.size());
  J.scheme = p.normalization;
  J.model = SolverModel::with_free_vars(p.m1 * (p.n + 1));

  if (p.normalization == NormalizationScheme::SumProxy) {
    J.z0 = add_vars(J.model, p.m1, 0.0, 1.0, true);
    for (int i = 0; i < p.m1; ++i) {
      std::vector<double> norm = zero_coeffs(J.model);
      for (int j = 0; j < p.n; ++j) norm[static_cast<std::size_t>(J.a(i, j))] = 1.0;
      norm[static_cast<std::size_t>(J.z0 + i)] = -2.0;
      J.model.add_row(std::move(norm), Relation::Equal, -1.0);
    }
  } else {
    J.p0 = add_vars(J.model, p.m1 * p.n, 0.0, 1.0, false);
    J.q0 = add_vars(J.model, p.m1 * p.n, 0.0, 1.0, false);
    J.s0 = add_vars(J.model, p.m1 * p.n, 0.0, 1.0, true);
    for (int i = 0; i < p.m1; ++i) {
      for (int j = 0; j < p.n; ++j) {
        const int idx = i * p.n + j;
        std::vector<double> split = zero_coeffs(J.model);
        split[static_cast<std::size_t>(J.a(i, j))] = 1.0;
        split[static_cast<std::size_t>(J.p0 + idx)] = -1.0;
        split[static_cast<std::size_t>(J.q0 + idx)] = 1.0;
        J.model.add_row(std::move(split), Relation::Equal, 0.0);
        std::vector<double> ps = zero_coeffs(J.model);
        ps[static_cast<std::size_t>(J.p0 + idx)] = 1.0;
        ps[static_cast<std::size_t>(J.s0 + idx)] = -1.0;
        J.model.add_row(std::move(ps), Relation::LessEqual, 0.0);
        std::vector<double> qs = zero_coeffs(J.model);
        qs[static_cast<std::size_t>(J.q0 + idx)] = 1.0;
        qs[static_cast<std::size_t>(J.s0 + idx)] = 1.0;
        J.model.add_row(std::move(qs), Relation::LessEqual, 1.0);
      }
      std::vector<double> unit = zero_coeffs(J.model);
      for (int j = 0; j < p.n; ++j) {
        unit[static_cast<std::size_t>(J.p0 + i * p.n + j)] = 1.0;
        unit[static_cast<std::size_t>(J.q0 + i * p.n + j)] = 1.0;
      }
      J.model.add_row(std::move(unit), Relation::Equal, 1.0);
    }
  }

  for (int i = 0; i < p.m1; ++i) {
    for (int k = 0; k < J.K; ++k) {
      const std::vector<double>& x = p.obs.points[static_cast<std::size_t>(k)];
      std::vector<double> feas = zero_coeffs(J.model);
      for (int j = 0; j < p.n; ++j) feas[static_cast<std::size_t>(J.a(i, j))] = x[static_cast<std::size_t>(j)];
      feas[static_cast<std::size_t>(J.b(i))] = -1.0;
      J.model.add_row(std::move(feas), Relation::GreaterEqual, 0.0);
    }
  }

  for (const SideConstraint& sc : p.side_constraints) {
    std::vector<double> row = zero_coeffs(J.model);
    for (int j = 0; j < p.n; ++j)
      row[static_cast<std::size_t>(J.a(sc.row_index, j))] = sc.coeff_a[static_cast<std::size_t>(j)];
    row[static_cast<std::size_t>(J.b(sc.row_index))] = sc.coeff_b;
    J.model.add_row(std::move(row), sc.rel, sc.rhs);
  }
  return J;
}

LinExpr extend_adjacency(Joint& J, const ProblemInstance& p) {
  LinExpr e;
  for (int i = 0; i < J.m1; ++i) {
    for (int j = 0; j < J.n; ++j) {
      double s = 0.0;
      for (const std::vector<double>& x : p.obs.points) s += x[static_cast<std::size_t>(j)];
      e.terms.emplace_back(J.a(i, j), s);
    }
    e.terms.emplace_back(J.b(i), -static_cast<double>(J.K));
  }
  return e;
}

struct FairnessVars {
  int d0 = -1;  // aggregate distances, one per observation
  int u0 = -1;  // absolute-deviation bounds
};

LinExpr extend_fairness(Joint& J, const ProblemInstance& p, FairnessVars& fv) {
  const int K = J.K;
  fv.d0 = add_vars(J.model, K, -kInf, kInf, false);
  fv.u0 = add_vars(J.model, K, 0.0, kInf, false);
  for (int k = 0; k < K; ++k) {
    const std::vector<double>& x = p.obs.points[static_cast<std::size_t>(k)];
    std::vector<double> def = zero_coeffs(J.model);
    def[static_cast<std::size_t>(fv.d0 + k)] = 1.0;
    for (int i = 0; i < J.m1; ++i) {
      for (int j = 0; j < J.n; ++j)
        def[static_cast<std::size_t>(J.a(i, j))] -= x[static_cast<std::size_t>(j)];
      def[static_cast<std::size_t>(J.b(i))] += 1.0;
    }
    J.model.add_row(std::move(def), Relation::Equal, 0.0);
  }
  const double invK = 1.0 / static_cast<double>(K);
  for (int k = 0; k < K; ++k) {
    std::vector<double> above = zero_coeffs(J.model);
    above[static_cast<std::size_t>(fv.u0 + k)] = 1.0;
    for (int l = 0; l < K; ++l) above[static_cast<std::size_t>(fv.d0 + l)] += invK;
    above[static_cast<std::size_t>(fv.d0 + k)] -= 1.0;
    J.model.add_row(std::move(above), Relation::GreaterEqual, 0.0);
    std::vector<double> below = zero_coeffs(J.model);
    below[static_cast<std::size_t>(fv.u0 + k)] = 1.0;
    for (int l = 0; l < K; ++l) below[static_cast<std::size_t>(fv.d0 + l)] -= invK;
    below[static_cast<std::size_t>(fv.d0 + k)] += 1.0;
    J.model.add_row(std::move(below), Relation::GreaterEqual, 0.0);
  }
  LinExpr e;
  for (int k = 0; k < K; ++k) e.terms.emplace_back(fv.u0 + k, 1.0);
  return e;
}

struct CompactnessVars {
  int m0 = -1;   // per-observation nearest distances
  int g0 = -1;   // relaxation binaries, row-major m1 x K
  double big_m = 0.0;
};

LinExpr extend_compactness(Joint& J, const ProblemInstance& p, double big_m,
                           const std::vector<double>* d_star,
                           std::optional<double> objective_ub, bool symmetry,
                           CompactnessVars& cv) {
  const int K = J.K;
  cv.big_m = big_m;
  cv.m0 = add_vars(J.model, K, 0.0, kInf, false);
  cv.g0 = add_vars(J.model, J.m1 * K, 0.0, 1.0, true);
  if (d_star) {
    for (int k = 0; k < K; ++k) {
      VarBounds& bb = J.model.var_bounds[static_cast<std::size_t>(cv.m0 + k)];
      bb.lower = std::max(bb.lower, (*d_star)[static_cast<std::size_t>(k)]);
    }
  }
  for (int i = 0; i < J.m1; ++i) {
    for (int k = 0; k < K; ++k) {
      const std::vector<double>& x = p.obs.points[static_cast<std::size_t>(k)];
      std::vector<double> rel = zero_coeffs(J.model);
      rel[static_cast<std::size_t>(cv.m0 + k)] = 1.0;
      for (int j = 0; j < J.n; ++j)
        rel[static_cast<std::size_t>(J.a(i, j))] -= x[static_cast<std::size_t>(j)];
      rel[static_cast<std::size_t>(J.b(i))] += 1.0;
      rel[static_cast<std::size_t>(cv.g0 + i * K + k)] = big_m;
      J.model.add_row(std::move(rel), Relation::GreaterEqual, 0.0);
    }
  }
  for (int k = 0; k < K; ++k) {
    std::vector<double> pick = zero_coeffs(J.model);
    for (int i = 0; i < J.m1; ++i) pick[static_cast<std::size_t>(cv.g0 + i * K + k)] = 1.0;
    J.model.add_row(std::move(pick), Relation::Equal, static_cast<double>(J.m1 - 1));
  }
  if (d_star) {
    // Valid cuts: every admissible row keeps at least the per-observation
    // minimum distance.
    for (int i = 0; i < J.m1; ++i) {
      for (int k = 0; k < K; ++k) {
        const std::vector<double>& x = p.obs.points[static_cast<std::size_t>(k)];
        std::vector<double> cut = zero_coeffs(J.model);
        for (int j = 0; j < J.n; ++j)
          cut[static_cast<std::size_t>(J.a(i, j))] = x[static_cast<std::size_t>(j)];
        cut[static_cast<std::size_t>(J.b(i))] = -1.0;
        J.model.add_row(std::move(cut), Relation::GreaterEqual,
                        (*d_star)[static_cast<std::size_t>(k)]);
      }
    }
  }
  if (symmetry) {
    // Interchangeable rows: order right-hand sides to break permutation ties.
    for (int i = 0; i + 1 < J.m1; ++i) {
      std::vector<double> ord = zero_coeffs(J.model);
      ord[static_cast<std::size_t>(J.b(i + 1))] = 1.0;
      ord[static_cast<std::size_t>(J.b(i))] = -1.0;
      J.model.add_row(std::move(ord), Relation::GreaterEqual, 0.0);
    }
  }
  LinExpr e;
  for (int k = 0; k < K; ++k) e.terms.emplace_back(cv.m0 + k, 1.0);
  if (objective_ub) {
    pin_expr(J.model, e, *objective_ub);
  }
  return e;
}

LinExpr extend_adherence_l1(Joint& J, const Polyhedron& prior,
                            const std::vector<double>& weights) {
  const int block = J.n + 1;
  const int e0 = add_vars(J.model, J.m1 * block, 0.0, kInf, false);
  for (int i = 0; i < J.m1; ++i) {
    const ConstraintRow& pr = prior.rows[static_cast<std::size_t>(i)];
    for (int j = 0; j <= J.n; ++j) {
      const int var = (j < J.n) ? J.a(i, j) : J.b(i);
      const double target = (j < J.n) ? pr.a[static_cast<std::size_t>(j)] : pr.b;
      std::vector<double> upper = zero_coeffs(J.model);
      upper[static_cast<std::size_t>(e0 + i * block + j)] = 1.0;
      upper[static_cast<std::size_t>(var)] = -1.0;
      J.model.add_row(std::move(upper), Relation::GreaterEqual, -target);
      std::vector<double> lower = zero_coeffs(J.model);
      lower[static_cast<std::size_t>(e0 + i * block + j)] = 1.0;
      lower[static_cast<std::size_t>(var)] = 1.0;
      J.model.add_row(std::move(lower), Relation::GreaterEqual, target);
    }
  }
  LinExpr e;
  for (int i = 0; i < J.m1; ++i)
    for (int j = 0; j <= J.n; ++j)
      e.terms.emplace_back(e0 + i * block + j, weights[static_cast<std::size_t>(i)]);
  return e;
}

std::vector<ConstraintRow> joint_rows_from_solution(const Joint& J,
                                                    const std::vector<double>& sol,
                                                    NormalizationScheme scheme) {
  std::vector<ConstraintRow> rows;
  rows.reserve(static_cast<std::size_t>(J.m1));
  for (int i = 0; i < J.m1; ++i) {
    std::vector<double> a(static_cast<std::size_t>(J.n));
    for (int j = 0; j < J.n; ++j) a[static_cast<std::size_t>(j)] = sol[static_cast<std::size_t>(J.a(i, j))];
    rows.push_back(to_normalized_row(a, sol[static_cast<std::size_t>(J.b(i))], scheme));
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Loss evaluation on finished rows (shared by all paths so that loss_value
// always describes the returned rows).
// ---------------------------------------------------------------------------

double evaluate_loss(const ProblemInstance& p, const std::vector<ConstraintRow>& rows,
                     const LossSpec& loss);

double evaluate_adjacency(const ProblemInstance& p, const std::vector<ConstraintRow>& rows) {
  double total = 0.0;
  for (const ConstraintRow& r : rows)
    for (const std::vector<double>& x : p.obs.points) total += slack_distance(r, x);
  return total;
}

std::vector<double> aggregate_distances(const ProblemInstance& p,
                                        const std::vector<ConstraintRow>& rows) {
  std::vector<double> d(p.obs.points.size(), 0.0);
  for (std::size_t k = 0; k < p.obs.points.size(); ++k)
    for (const ConstraintRow& r : rows) d[k] += slack_distance(r, p.obs.points[k]);
  return d;
}

double evaluate_fairness(const ProblemInstance& p, const std::vector<ConstraintRow>& rows) {
  const std::vector<double> d = aggregate_distances(p, rows);
  double mean = 0.0;
  for (double v : d) mean += v;
  mean /= static_cast<double>(d.size());
  double mad = 0.0;
  for (double v : d) mad += std::abs(v - mean);
  return mad;
}

double evaluate_compactness(const ProblemInstance& p, const std::vector<ConstraintRow>& rows) {
  double total = 0.0;
  for (const std::vector<double>& x : p.obs.points) {
    double best = kInf;
    for (const ConstraintRow& r : rows) best = std::min(best, slack_distance(r, x));
    total += best;
  }
  return total;
}

double evaluate_adherence(const ProblemInstance& p, const std::vector<ConstraintRow>& rows,
                          const LossSpec& loss) {
  std::vector<double> weights = loss.weights;
  if (weights.empty()) weights.assign(static_cast<std::size_t>(p.m1), 1.0);
  double total = 0.0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const ConstraintRow prior =
        normalize_row(loss.prior.rows[i], p.normalization);
    double dist = 0.0;
    for (std::size_t j = 0; j < rows[i].a.size(); ++j) {
      const double diff = rows[i].a[j] - prior.a[j];
      dist += (loss.distance == DistanceNorm::L1) ? std::abs(diff) : diff * diff;
    }
    const double diffb = rows[i].b - prior.b;
    dist += (loss.distance == DistanceNorm::L1) ? std::abs(diffb) : diffb * diffb;
    total += weights[i] * dist;
  }
  return total;
}

double evaluate_loss(const ProblemInstance& p, const std::vector<ConstraintRow>& rows,
                     const LossSpec& loss) {
  switch (loss.kind) {
    case LossSpec::Kind::Indifference: return 0.0;
    case LossSpec::Kind::Adjacency: return evaluate_adjacency(p, rows);
    case LossSpec::Kind::Fairness: return evaluate_fairness(p, rows);
    case LossSpec::Kind::Compactness: return evaluate_compactness(p, rows);
    case LossSpec::Kind::Adherence: return evaluate_adherence(p, rows, loss);
    case LossSpec::Kind::Combined:
      return evaluate_loss(p, rows, loss.sequence.back());
  }
  throw Error("evaluate_loss: unknown loss kind");
}

// ---------------------------------------------------------------------------
// Assembly and verification tail shared by every imputation path.
// ---------------------------------------------------------------------------

ImputedRegion finish(const ProblemInstance& p, std::vector<ConstraintRow> rows,
                     std::vector<RowDiagnostics> diags, double loss_value,
                     std::vector<double> stage_losses, const ImputeOptions& options) {
  snap_offsets(p, rows);  // backstop; row producers snap before loss evaluation
  ImputedRegion out;
  out.known_set_S = build_known_set(p.c, p.obs.preferred(), p.known, p.normalization);
  out.imputed_rows = std::move(rows);
  out.loss_value = loss_value;
  out.stage_losses = std::move(stage_losses);
  out.per_row_diagnostics = std::move(diags);
  const Polyhedron region = assemble_region(out.imputed_rows, out.known_set_S);
  out.verification = verify_imputation(region, p.obs, p.c, options.solver);
  if (!out.verification.all_true()) {
    std::ostringstream msg;
    msg << "internal: imputed region failed verification (feasible="
        << out.verification.primal_feasible
        << ", worst violation=" << out.verification.worst_violation
        << ", preferred-optimal=" << out.verification.x0_optimal
        << ", normalization=" << out.verification.normalization_ok << ")";
    throw Error(msg.str());
  }
  return out;
}

std::vector<RowDiagnostics> uniform_diags(const std::vector<ConstraintRow>& rows,
                                          double objective, long nodes, long iterations) {
  std::vector<RowDiagnostics> diags;
  diags.reserve(rows.size());
  for (const ConstraintRow& r : rows)
    diags.push_back(RowDiagnostics{r.tag.sigma, objective, nodes, iterations});
  return diags;
}

}  // namespace

// ---------------------------------------------------------------------------
// Public surface.
// ---------------------------------------------------------------------------

LossSpec LossSpec::indifference() { return LossSpec{}; }
LossSpec LossSpec::adjacency() {
  LossSpec l;
  l.kind = Kind::Adjacency;
  return l;
}
LossSpec LossSpec::fairness() {
  LossSpec l;
  l.kind = Kind::Fairness;
  return l;
}
LossSpec LossSpec::compactness(std::optional<double> big_m) {
  LossSpec l;
  l.kind = Kind::Compactness;
  l.big_m = big_m;
  return l;
}
LossSpec LossSpec::adherence(Polyhedron prior, std::vector<double> weights,
                             DistanceNorm distance) {
  LossSpec l;
  l.kind = Kind::Adherence;
  l.prior = std::move(prior);
  l.weights = std::move(weights);
  l.distance = distance;
  return l;
}
LossSpec LossSpec::combined(std::vector<LossSpec> sequence, double epsilon) {
  LossSpec l;
  l.kind = Kind::Combined;
  l.sequence = std::move(sequence);
  l.epsilon = epsilon;
  return l;
}

Polyhedron ImputedRegion::full_region() const {
  return assemble_region(imputed_rows, known_set_S);
}

void validate_problem(const ProblemInstance& p) {
  if (p.n < 1) throw Error("problem: dimension must be at least 1");
  if (static_cast<int>(p.c.size()) != p.n)
    throw DimensionError("problem: cost vector length differs from n");
  bool c_nonzero = false;
  for (double v : p.c)
    if (v != 0.0) c_nonzero = true;
  if (!c_nonzero) throw Error("problem: cost vector must be nonzero");
  if (p.obs.points.empty()) throw Error("problem: at least one observation required");
  for (const std::vector<double>& x : p.obs.points)
    if (static_cast<int>(x.size()) != p.n)
      throw DimensionError("problem: observation dimension differs from n");
  if (p.obs.preferred_index < 0 ||
      p.obs.preferred_index >= static_cast<int>(p.obs.points.size()))
    throw Error("problem: preferred observation index out of range");
  const double cx0 = dot(p.c, p.obs.preferred());
  for (const std::vector<double>& x : p.obs.points) {
    if (dot(p.c, x) < cx0 - 1e-9)
      throw Error("problem: preferred observation is not cost-minimal");
  }
  if (p.known.n != p.n && !(p.known.rows.empty() && p.known.n == 0))
    throw DimensionError("problem: known-set dimension differs from n");
  for (const ConstraintRow& r : p.known.rows)
    if (static_cast<int>(r.a.size()) != p.n)
      throw DimensionError("problem: known row width differs from n");
  if (p.m1 < 1) throw Error("problem: m1 must be at least 1");
  const ValidityReport known_ok =
      is_valid_set(Polyhedron{p.n, p.known.rows}, p.obs);
  if (!known_ok.valid) {
    std::ostringstream msg;
    msg << "problem: the known constraints exclude an observation (worst violation "
        << known_ok.worst_violation << " at row " << known_ok.violations.front().row
        << ", observation " << known_ok.violations.front().observation << ")";
    throw Error(msg.str());
  }
  for (const SideConstraint& sc : p.side_constraints) {
    if (sc.row_index < 0 || sc.row_index >= p.m1)
      throw Error("problem: side constraint references a row outside [0, m1)");
    if (static_cast<int>(sc.coeff_a.size()) != p.n)
      throw DimensionError("problem: side constraint coefficient width differs from n");
  }
}

Polyhedron build_known_set(const std::vector<double>& c, const std::vector<double>& x0,
                           const Polyhedron& known, NormalizationScheme scheme) {
  Polyhedron S;
  S.n = static_cast<int>(c.size());
  S.rows.push_back(half_space_of_cost(c, x0, scheme));
  for (const ConstraintRow& r : known.rows) S.rows.push_back(r);
  return S;
}

Polyhedron assemble_region(const std::vector<ConstraintRow>& rows, const Polyhedron& S) {
  Polyhedron region = S;
  for (const ConstraintRow& r : rows) region.rows.push_back(r);
  return region;
}

double default_big_m(const ObservationSet& obs) {
  double max_l1 = 0.0;
  for (const std::vector<double>& x : obs.points) {
    double l1 = 0.0;
    for (double v : x) l1 += std::abs(v);
    max_l1 = std::max(max_l1, l1);
  }
  return 10.0 * max_l1 + 10.0;
}

ImputedRegion impute_indifference(const ProblemInstance& p, const ImputeOptions& options) {
  validate_problem(p);
  const ConstraintRow c_row =
      half_space_of_cost(p.c, p.obs.preferred(), p.normalization);
  std::vector<ConstraintRow> rows(static_cast<std::size_t>(p.m1), c_row);
  return finish(p, rows, uniform_diags(rows, 0.0, 0, 0), 0.0, {}, options);
}

namespace {

bool side_constraints_for_row(const ProblemInstance& p, int i) {
  for (const SideConstraint& sc : p.side_constraints)
    if (sc.row_index == i) return true;
  return false;
}

bool row_satisfies_side_constraints(const ProblemInstance& p, int i,
                                    const ConstraintRow& row) {
  for (const SideConstraint& sc : p.side_constraints) {
    if (sc.row_index != i) continue;
    const double lhs = dot(sc.coeff_a, row.a) + sc.coeff_b * row.b;
    switch (sc.rel) {
      case Relation::GreaterEqual:
        if (lhs < sc.rhs - kFeasTol) return false;
        break;
      case Relation::LessEqual:
        if (lhs > sc.rhs + kFeasTol) return false;
        break;
      case Relation::Equal:
        if (std::abs(lhs - sc.rhs) > kFeasTol) return false;
        break;
    }
  }
  return true;
}

// Solves one unknown-row subproblem for a given objective builder; under the
// sum-proxy scheme both sign branches are solved and the better one kept
// (ties prefer the positive branch).
struct BranchOutcome {
  bool feasible = false;
  SolverResult result;
  SolverModel model;
  RowVars vars;
  int sigma = 0;
};

template <typename ObjectiveFn>
BranchOutcome solve_row_branches(const ProblemInstance& p, int side_row_index,
                                 const ImputeOptions& options, ObjectiveFn&& objective,
                                 const std::string& what) {
  BranchOutcome best;
  if (p.normalization == NormalizationScheme::SumProxy) {
    for (int sigma : {+1, -1}) {
      RowVars v;
      SolverModel m = make_row_model(p, sigma, side_row_index, v);
      objective(m, v);
      SolverResult r = solve_auto(m, options.solver);
      if (r.status == SolveStatus::IterationLimit || r.status == SolveStatus::Unbounded)
        throw_solver_failure(r.status, what);
      if (r.status != SolveStatus::Optimal) continue;
      if (!best.feasible || r.objective_value < best.result.objective_value - kPinTol) {
        best = BranchOutcome{true, std::move(r), std::move(m), v, sigma};
      }
    }
  } else {
    RowVars v;
    SolverModel m = make_row_model(p, 0, side_row_index, v);
    objective(m, v);
    SolverResult r = solve_auto(m, options.solver);
    if (r.status == SolveStatus::IterationLimit || r.status == SolveStatus::Unbounded)
      throw_solver_failure(r.status, what);
    if (r.status == SolveStatus::Optimal)
      best = BranchOutcome{true, std::move(r), std::move(m), v, 0};
  }
  if (!best.feasible)
    throw InfeasibleImputation(what + ": no admissible row satisfies the side "
                                      "constraints and observation feasibility");
  return best;
}

RowSolution canonical_feasible_row(const ProblemInstance& p, int side_row_index,
                                   const ImputeOptions& options) {
  auto zero_objective = [](SolverModel&, const RowVars&) {};
  BranchOutcome out = solve_row_branches(p, side_row_index, options, zero_objective,
                                         "row selection");
  RowSolution sol = refine_row(out.model, out.vars, p.n, out.result, options);
  sol.sigma = out.sigma;
  sol.objective = 0.0;
  return sol;
}

}  // namespace

ImputedRegion impute_adherence(const ProblemInstance& p, const Polyhedron& prior,
                               std::vector<double> weights, DistanceNorm distance,
                               const ImputeOptions& options) {
  validate_problem(p);
  if (static_cast<int>(prior.rows.size()) != p.m1)
    throw Error("adherence: prior must supply exactly m1 rows");
  if (prior.n != p.n) throw DimensionError("adherence: prior dimension differs from n");
  if (weights.empty()) weights.assign(static_cast<std::size_t>(p.m1), 1.0);
  if (static_cast<int>(weights.size()) != p.m1)
    throw Error("adherence: weights length differs from m1");
  for (double w : weights)
    if (w < 0.0) throw Error("adherence: weights must be nonnegative");
  if (distance == DistanceNorm::L2 && p.normalization == NormalizationScheme::L1Exact)
    throw Error("adherence: the L2 distance is not available under the l1-exact "
                "scheme; use the L1 distance");

  // The prior denotes half-spaces; measure distances in normalized form.
  Polyhedron norm_prior;
  norm_prior.n = p.n;
  for (const ConstraintRow& r : prior.rows)
    norm_prior.rows.push_back(normalize_row(r, p.normalization));

  // A prior that is already a valid feasible set (and meets any side
  // constraints) is optimal as-is with zero loss.
  bool prior_ok = is_valid_set(norm_prior, p.obs).valid;
  if (prior_ok) {
    for (int i = 0; i < p.m1 && prior_ok; ++i)
      prior_ok = row_satisfies_side_constraints(p, i, norm_prior.rows[static_cast<std::size_t>(i)]);
  }
  if (prior_ok) {
    std::vector<RowDiagnostics> diags = uniform_diags(norm_prior.rows, 0.0, 0, 0);
    return finish(p, norm_prior.rows, diags, 0.0, {}, options);
  }

  const ConstraintRow c_row = half_space_of_cost(p.c, p.obs.preferred(), p.normalization);
  std::vector<ConstraintRow> rows;
  std::vector<RowDiagnostics> diags;
  double total_loss = 0.0;

  for (int i = 0; i < p.m1; ++i) {
    const ConstraintRow& target = norm_prior.rows[static_cast<std::size_t>(i)];
    const double w = weights[static_cast<std::size_t>(i)];
    if (w == 0.0) {
      // The row does not contribute to the loss: any admissible row works.
      if (!side_constraints_for_row(p, i)) {
        rows.push_back(c_row);
        diags.push_back(RowDiagnostics{c_row.tag.sigma, 0.0, 0, 0});
      } else {
        RowSolution sol = canonical_feasible_row(p, i, options);
        ConstraintRow row = to_normalized_row(sol.a, sol.b, p.normalization);
        rows.push_back(row);
        diags.push_back(RowDiagnostics{row.tag.sigma, 0.0, sol.nodes, sol.iterations});
      }
      continue;
    }

    if (distance == DistanceNorm::L2) {
      auto qp_objective = [&](SolverModel& m, const RowVars& v) {
        std::vector<double> quad(static_cast<std::size_t>(m.num_vars), 0.0);
        for (int j = 0; j < p.n; ++j) {
          quad[static_cast<std::size_t>(v.a0 + j)] = w;
          m.objective[static_cast<std::size_t>(v.a0 + j)] =
              -2.0 * w * target.a[static_cast<std::size_t>(j)];
        }
        quad[static_cast<std::size_t>(v.b)] = w;
        m.objective[static_cast<std::size_t>(v.b)] = -2.0 * w * target.b;
        m.quadratic_diag = std::move(quad);
      };
      BranchOutcome best;
      for (int sigma : {+1, -1}) {
        RowVars v;
        SolverModel m = make_row_model(p, sigma, i, v);
        qp_objective(m, v);
        SolverResult r = solve_qp_activeset(m, options.solver);
        if (r.status == SolveStatus::Unbounded)
          throw Error("adherence: quadratic row subproblem unbounded");
        if (r.status != SolveStatus::Optimal) continue;
        if (!best.feasible || r.objective_value < best.result.objective_value - kPinTol)
          best = BranchOutcome{true, std::move(r), std::move(m), v, sigma};
      }
      if (!best.feasible)
        throw InfeasibleImputation("adherence: no admissible row for row " +
                                   std::to_string(i));
      std::vector<double> a(best.result.solution.begin() + best.vars.a0,
                            best.result.solution.begin() + best.vars.a0 + p.n);
      const double b = best.result.solution[static_cast<std::size_t>(best.vars.b)];
      double anchor = w * target.b * target.b;
      for (int j = 0; j < p.n; ++j)
        anchor += w * target.a[static_cast<std::size_t>(j)] * target.a[static_cast<std::size_t>(j)];
      const double row_loss = best.result.objective_value + anchor;
      ConstraintRow row = to_normalized_row(a, b, p.normalization);
      rows.push_back(row);
      diags.push_back(RowDiagnostics{row.tag.sigma, row_loss, 0, best.result.iterations});
      total_loss += row_loss;
      continue;
    }

    auto l1_objective = [&](SolverModel& m, const RowVars& v) {
      const int e0 = add_vars(m, p.n + 1, 0.0, kInf, false);
      for (int j = 0; j <= p.n; ++j) {
        const int var = (j < p.n) ? v.a0 + j : v.b;
        const double tgt = (j < p.n) ? target.a[static_cast<std::size_t>(j)] : target.b;
        std::vector<double> upper = zero_coeffs(m);
        upper[static_cast<std::size_t>(e0 + j)] = 1.0;
        upper[static_cast<std::size_t>(var)] = -1.0;
        m.add_row(std::move(upper), Relation::GreaterEqual, -tgt);
        std::vector<double> lower = zero_coeffs(m);
        lower[static_cast<std::size_t>(e0 + j)] = 1.0;
        lower[static_cast<std::size_t>(var)] = 1.0;
        m.add_row(std::move(lower), Relation::GreaterEqual, tgt);
        m.objective[static_cast<std::size_t>(e0 + j)] = w;
      }
    };
    BranchOutcome best = solve_row_branches(p, i, options, l1_objective,
                                            "adherence row " + std::to_string(i));
    std::vector<double> a(best.result.solution.begin() + best.vars.a0,
                          best.result.solution.begin() + best.vars.a0 + p.n);
    const double b = best.result.solution[static_cast<std::size_t>(best.vars.b)];
    ConstraintRow row = to_normalized_row(a, b, p.normalization);
    rows.push_back(row);
    diags.push_back(RowDiagnostics{row.tag.sigma, best.result.objective_value,
                                   best.result.node_count, best.result.iterations});
    total_loss += best.result.objective_value;
  }

  snap_offsets(p, rows);
  LossSpec spec = LossSpec::adherence(prior, weights, distance);
  const double recomputed = evaluate_loss(p, rows, spec);
  if (std::abs(recomputed - total_loss) > 1e-6)
    throw Error("internal: adherence loss recomputation mismatch");
  return finish(p, rows, std::move(diags), recomputed, {}, options);
}

ImputedRegion impute_adjacency(const ProblemInstance& p, const ImputeOptions& options) {
  validate_problem(p);

  auto solve_for_row = [&](int side_row_index) {
    auto objective = [&](SolverModel& m, const RowVars& v) {
      const LinExpr e = row_total_slack_expr(p, v);
      set_objective(m, e);
    };
    BranchOutcome best = solve_row_branches(p, side_row_index, options, objective,
                                            "adjacency row");
    RowSolution sol = refine_row(best.model, best.vars, p.n, best.result, options);
    sol.sigma = best.sigma;
    return sol;
  };

  std::optional<RowSolution> shared;
  std::vector<ConstraintRow> rows;
  std::vector<RowDiagnostics> diags;
  for (int i = 0; i < p.m1; ++i) {
    RowSolution sol;
    if (side_constraints_for_row(p, i)) {
      sol = solve_for_row(i);
    } else {
      // Identical subproblems: solve once, replicate.
      if (!shared) shared = solve_for_row(-1);
      sol = *shared;
    }
    ConstraintRow row = to_normalized_row(sol.a, sol.b, p.normalization);
    rows.push_back(row);
    diags.push_back(RowDiagnostics{row.tag.sigma, sol.objective, sol.nodes, sol.iterations});
  }
  snap_offsets(p, rows);
  const double loss = evaluate_loss(p, rows, LossSpec::adjacency());
  return finish(p, rows, std::move(diags), loss, {}, options);
}

// ---------------------------------------------------------------------------
// Fairness.
// ---------------------------------------------------------------------------

namespace {

// Aggregate mean-absolute-deviation LP: the sum of `plus` positive-branch
// rows and `minus` negative-branch rows is represented by two scaled rows
// (U, W); `fixed` adds a constant per-observation contribution from rows
// already chosen elsewhere.
struct AggregateMad {
  SolverModel model;
  int n = 0, K = 0;
  int ua0 = 0, ub = 0, wa0 = 0, wb = 0, d0 = 0, u0 = 0;
};

AggregateMad build_aggregate_mad(const ProblemInstance& p, int plus, int minus,
                                 const std::vector<double>& fixed) {
  AggregateMad A;
  A.n = p.n;
  A.K = static_cast<int>(p.obs.points.size());
  A.ua0 = 0;
  A.ub = p.n;
  A.wa0 = p.n + 1;
  A.wb = 2 * p.n + 1;
  A.model = SolverModel::with_free_vars(2 * p.n + 2);
  A.d0 = add_vars(A.model, A.K, -kInf, kInf, false);
  A.u0 = add_vars(A.model, A.K, 0.0, kInf, false);

  auto fix_block = [&](int a0, int b) {
    for (int j = 0; j < p.n; ++j)
      A.model.var_bounds[static_cast<std::size_t>(a0 + j)] = VarBounds{0.0, 0.0};
    A.model.var_bounds[static_cast<std::size_t>(b)] = VarBounds{0.0, 0.0};
  };
  auto sum_and_feasibility = [&](int a0, int b, double target) {
    std::vector<double> sum = zero_coeffs(A.model);
    for (int j = 0; j < p.n; ++j) sum[static_cast<std::size_t>(a0 + j)] = 1.0;
    A.model.add_row(std::move(sum), Relation::Equal, target);
    for (const std::vector<double>& x : p.obs.points) {
      std::vector<double> feas = zero_coeffs(A.model);
      for (int j = 0; j < p.n; ++j) feas[static_cast<std::size_t>(a0 + j)] = x[static_cast<std::size_t>(j)];
      feas[static_cast<std::size_t>(b)] = -1.0;
      A.model.add_row(std::move(feas), Relation::GreaterEqual, 0.0);
    }
  };
  if (plus >= 1) sum_and_feasibility(A.ua0, A.ub, static_cast<double>(plus));
  else fix_block(A.ua0, A.ub);
  if (minus >= 1) sum_and_feasibility(A.wa0, A.wb, -static_cast<double>(minus));
  else fix_block(A.wa0, A.wb);

  for (int k = 0; k < A.K; ++k) {
    const std::vector<double>& x = p.obs.points[static_cast<std::size_t>(k)];
    std::vector<double> def = zero_coeffs(A.model);
    def[static_cast<std::size_t>(A.d0 + k)] = 1.0;
    for (int j = 0; j < p.n; ++j) {
      def[static_cast<std::size_t>(A.ua0 + j)] -= x[static_cast<std::size_t>(j)];
      def[static_cast<std::size_t>(A.wa0 + j)] -= x[static_cast<std::size_t>(j)];
    }
    def[static_cast<std::size_t>(A.ub)] += 1.0;
    def[static_cast<std::size_t>(A.wb)] += 1.0;
    A.model.add_row(std::move(def), Relation::Equal,
                    fixed.empty() ? 0.0 : fixed[static_cast<std::size_t>(k)]);
  }
  const double invK = 1.0 / static_cast<double>(A.K);
  for (int k = 0; k < A.K; ++k) {
    std::vector<double> above = zero_coeffs(A.model);
    above[static_cast<std::size_t>(A.u0 + k)] = 1.0;
    for (int l = 0; l < A.K; ++l) above[static_cast<std::size_t>(A.d0 + l)] += invK;
    above[static_cast<std::size_t>(A.d0 + k)] -= 1.0;
    A.model.add_row(std::move(above), Relation::GreaterEqual, 0.0);
    std::vector<double> below = zero_coeffs(A.model);
    below[static_cast<std::size_t>(A.u0 + k)] = 1.0;
    for (int l = 0; l < A.K; ++l) below[static_cast<std::size_t>(A.d0 + l)] -= invK;
    below[static_cast<std::size_t>(A.d0 + k)] += 1.0;
    A.model.add_row(std::move(below), Relation::GreaterEqual, 0.0);
  }
  for (int k = 0; k < A.K; ++k) A.model.objective[static_cast<std::size_t>(A.u0 + k)] = 1.0;
  return A;
}

struct BallastRows {
  std::vector<ConstraintRow> rows;  // plus-branch copies first
  double mad = 0.0;
  long iterations = 0;
};

std::optional<BallastRows> solve_ballast(const ProblemInstance& p, int plus, int minus,
                                         const std::vector<double>& fixed,
                                         const ImputeOptions& options) {
  AggregateMad A = build_aggregate_mad(p, plus, minus, fixed);
  SolverResult r = solve_lp(A.model, options.solver);
  if (r.status != SolveStatus::Optimal) return std::nullopt;
  BallastRows out;
  out.mad = r.objective_value;
  out.iterations = r.iterations;
  if (plus >= 1) {
    std::vector<double> a(static_cast<std::size_t>(p.n));
    for (int j = 0; j < p.n; ++j)
      a[static_cast<std::size_t>(j)] = r.solution[static_cast<std::size_t>(A.ua0 + j)] / plus;
    const double b = r.solution[static_cast<std::size_t>(A.ub)] / plus;
    const ConstraintRow row = to_normalized_row(a, b, p.normalization);
    out.rows.insert(out.rows.end(), static_cast<std::size_t>(plus), row);
  }
  if (minus >= 1) {
    std::vector<double> a(static_cast<std::size_t>(p.n));
    for (int j = 0; j < p.n; ++j)
      a[static_cast<std::size_t>(j)] = r.solution[static_cast<std::size_t>(A.wa0 + j)] / minus;
    const double b = r.solution[static_cast<std::size_t>(A.wb)] / minus;
    const ConstraintRow row = to_normalized_row(a, b, p.normalization);
    out.rows.insert(out.rows.end(), static_cast<std::size_t>(minus), row);
  }
  return out;
}

ImputedRegion fairness_aggregate(const ProblemInstance& p, const ImputeOptions& options) {
  std::optional<BallastRows> best;
  long total_iterations = 0;
  const std::vector<double> no_fixed;
  for (int plus = 0; plus <= p.m1; ++plus) {
    std::optional<BallastRows> r = solve_ballast(p, plus, p.m1 - plus, no_fixed, options);
    if (!r) continue;
    total_iterations += r->iterations;
    if (!best || r->mad < best->mad - 1e-12) best = std::move(r);
  }
  if (!best) throw Error("fairness: no sign split admits a feasible aggregate");
  snap_offsets(p, best->rows);
  std::vector<RowDiagnostics> diags = uniform_diags(best->rows, best->mad, 0, total_iterations);
  const double loss = evaluate_loss(p, best->rows, LossSpec::fairness());
  if (std::abs(loss - best->mad) > 1e-6)
    throw Error("internal: fairness loss recomputation mismatch");
  return finish(p, best->rows, std::move(diags), loss, {}, options);
}

ImputedRegion fairness_joint(const ProblemInstance& p, const ImputeOptions& options) {
  Joint J = make_joint_base(p);
  FairnessVars fv;
  const LinExpr e = extend_fairness(J, p, fv);
  set_objective(J.model, e);
  SolverResult r = solve_milp(J.model, options.solver);
  if (r.status != SolveStatus::Optimal) throw_solver_failure(r.status, "fairness");
  std::vector<ConstraintRow> rows = joint_rows_from_solution(J, r.solution, p.normalization);
  snap_offsets(p, rows);
  const double loss = evaluate_loss(p, rows, LossSpec::fairness());
  if (std::abs(loss - r.objective_value) > 1e-6)
    throw Error("internal: fairness loss recomputation mismatch");
  std::vector<RowDiagnostics> diags =
      uniform_diags(rows, r.objective_value, r.node_count, r.iterations);
  return finish(p, rows, std::move(diags), loss, {}, options);
}

}  // namespace

ImputedRegion impute_fairness(const ProblemInstance& p, const ImputeOptions& options) {
  validate_problem(p);
  if (!options.force_milp && p.normalization == NormalizationScheme::SumProxy &&
      p.side_constraints.empty())
    return fairness_aggregate(p, options);
  return fairness_joint(p, options);
}

// ---------------------------------------------------------------------------
// Compactness.
// ---------------------------------------------------------------------------

namespace {

struct CompactnessCertificate {
  std::vector<double> d_star;             // per-observation minimum distance
  double lower_bound = 0.0;               // sum of d_star
  std::vector<ConstraintRow> candidates;  // deduplicated admissible rows
  std::vector<std::vector<char>> covers;  // candidates x observations
  std::optional<std::vector<int>> cover;  // candidate indices, size <= m1
  long iterations = 0;
  long nodes = 0;
};

void add_candidate(std::vector<ConstraintRow>& cands, const ConstraintRow& row) {
  for (const ConstraintRow& c : cands) {
    if (std::abs(c.b - row.b) > 1e-9) continue;
    bool same = true;
    for (std::size_t j = 0; j < c.a.size(); ++j)
      if (std::abs(c.a[j] - row.a[j]) > 1e-9) same = false;
    if (same) return;
  }
  cands.push_back(row);
}

// Per-observation minimum distances over all admissible rows, plus a pool of
// rows that attain them. Requires no side constraints.
CompactnessCertificate compactness_certificate(const ProblemInstance& p,
                                               const ImputeOptions& options,
                                               int cover_budget) {
  CompactnessCertificate cert;
  const int K = static_cast<int>(p.obs.points.size());
  cert.d_star.assign(static_cast<std::size_t>(K), kInf);

  for (int k = 0; k < K; ++k) {
    auto objective = [&](SolverModel& m, const RowVars& v) {
      set_objective(m, row_slack_at_expr(p, v, k));
    };
    // Two candidates per branch: the distance LP's own vertex, then -- with
    // this observation pinned at that branch minimum -- the row of smallest
    // total slack, which serves the largest natural group of observations at
    // their own minima and so makes small covers findable.
    if (p.normalization == NormalizationScheme::SumProxy) {
      for (int sigma : {+1, -1}) {
        RowVars v;
        SolverModel m = make_row_model(p, sigma, -1, v);
        objective(m, v);
        SolverResult r = require_optimal(solve_lp(m, options.solver),
                                         "compactness distance bound");
        cert.iterations += r.iterations;
        cert.d_star[static_cast<std::size_t>(k)] =
            std::min(cert.d_star[static_cast<std::size_t>(k)], r.objective_value);
        std::vector<double> a(r.solution.begin() + v.a0, r.solution.begin() + v.a0 + p.n);
        add_candidate(cert.candidates,
                      to_normalized_row(a, r.solution[static_cast<std::size_t>(v.b)],
                                        p.normalization));
        pin_expr(m, row_slack_at_expr(p, v, k), r.objective_value + kCoverTol);
        set_objective(m, row_total_slack_expr(p, v));
        SolverResult r2 = require_optimal(solve_lp(m, options.solver),
                                          "compactness group candidate");
        cert.iterations += r2.iterations;
        std::vector<double> a2(r2.solution.begin() + v.a0, r2.solution.begin() + v.a0 + p.n);
        add_candidate(cert.candidates,
                      to_normalized_row(a2, r2.solution[static_cast<std::size_t>(v.b)],
                                        p.normalization));
      }
    } else {
      RowVars v;
      SolverModel m = make_row_model(p, 0, -1, v);
      objective(m, v);
      SolverResult r = require_optimal(solve_milp(m, options.solver),
                                       "compactness distance bound");
      cert.iterations += r.iterations;
      cert.nodes += r.node_count;
      cert.d_star[static_cast<std::size_t>(k)] = r.objective_value;
      std::vector<double> a(r.solution.begin() + v.a0, r.solution.begin() + v.a0 + p.n);
      add_candidate(cert.candidates,
                    to_normalized_row(a, r.solution[static_cast<std::size_t>(v.b)],
                                      p.normalization));
      pin_expr(m, row_slack_at_expr(p, v, k), r.objective_value + kCoverTol);
      set_objective(m, row_total_slack_expr(p, v));
      SolverResult r2 = require_optimal(solve_milp(m, options.solver),
                                        "compactness group candidate");
      cert.iterations += r2.iterations;
      cert.nodes += r2.node_count;
      std::vector<double> a2(r2.solution.begin() + v.a0, r2.solution.begin() + v.a0 + p.n);
      add_candidate(cert.candidates,
                    to_normalized_row(a2, r2.solution[static_cast<std::size_t>(v.b)],
                                      p.normalization));
    }
  }
  cert.lower_bound = 0.0;
  for (double d : cert.d_star) cert.lower_bound += d;

  // Axis-aligned supporting rows and the cost half-space are always admissible.
  for (int j = 0; j < p.n; ++j) {
    double lo = kInf, hi = -kInf;
    for (const std::vector<double>& x : p.obs.points) {
      lo = std::min(lo, x[static_cast<std::size_t>(j)]);
      hi = std::max(hi, x[static_cast<std::size_t>(j)]);
    }
    std::vector<double> e(static_cast<std::size_t>(p.n), 0.0);
    e[static_cast<std::size_t>(j)] = 1.0;
    add_candidate(cert.candidates,
                  ConstraintRow{e, lo, p.normalization == NormalizationScheme::SumProxy
                                          ? NormalizationTag::sum_proxy(1)
                                          : NormalizationTag::l1_exact()});
    e[static_cast<std::size_t>(j)] = -1.0;
    add_candidate(cert.candidates,
                  ConstraintRow{e, -hi, p.normalization == NormalizationScheme::SumProxy
                                            ? NormalizationTag::sum_proxy(-1)
                                            : NormalizationTag::l1_exact()});
  }
  add_candidate(cert.candidates,
                half_space_of_cost(p.c, p.obs.preferred(), p.normalization));

  const int C = static_cast<int>(cert.candidates.size());
  cert.covers.assign(static_cast<std::size_t>(C), std::vector<char>(static_cast<std::size_t>(K), 0));
  for (int r = 0; r < C; ++r)
    for (int k = 0; k < K; ++k)
      cert.covers[static_cast<std::size_t>(r)][static_cast<std::size_t>(k)] =
          slack_distance(cert.candidates[static_cast<std::size_t>(r)],
                         p.obs.points[static_cast<std::size_t>(k)]) <=
          cert.d_star[static_cast<std::size_t>(k)] + kCoverTol;

  // Greedy cover first; exact minimum cover (a small MILP over candidate
  // selectors) only when greedy overshoots the budget.
  std::vector<int> greedy;
  std::vector<char> covered(static_cast<std::size_t>(K), 0);
  int remaining = K;
  while (remaining > 0 && static_cast<int>(greedy.size()) <= cover_budget) {
    int best_r = -1, best_gain = 0;
    for (int r = 0; r < C; ++r) {
      int gain = 0;
      for (int k = 0; k < K; ++k)
        if (!covered[static_cast<std::size_t>(k)] &&
            cert.covers[static_cast<std::size_t>(r)][static_cast<std::size_t>(k)])
          ++gain;
      if (gain > best_gain) {
        best_gain = gain;
        best_r = r;
      }
    }
    if (best_r < 0) break;  // an observation no candidate covers (cannot happen)
    greedy.push_back(best_r);
    for (int k = 0; k < K; ++k)
      if (cert.covers[static_cast<std::size_t>(best_r)][static_cast<std::size_t>(k)] &&
          !covered[static_cast<std::size_t>(k)]) {
        covered[static_cast<std::size_t>(k)] = 1;
        --remaining;
      }
  }
  if (remaining == 0 && static_cast<int>(greedy.size()) <= cover_budget) {
    cert.cover = std::move(greedy);
    return cert;
  }

  SolverModel sc = SolverModel::with_free_vars(C);
  for (int r = 0; r < C; ++r) {
    sc.var_bounds[static_cast<std::size_t>(r)] = VarBounds{0.0, 1.0};
    sc.integrality[static_cast<std::size_t>(r)] = 1;
    sc.objective[static_cast<std::size_t>(r)] = 1.0;
  }
  for (int k = 0; k < K; ++k) {
    std::vector<double> row(static_cast<std::size_t>(C), 0.0);
    bool any = false;
    for (int r = 0; r < C; ++r) {
      if (cert.covers[static_cast<std::size_t>(r)][static_cast<std::size_t>(k)]) {
        row[static_cast<std::size_t>(r)] = 1.0;
        any = true;
      }
    }
    if (!any) return cert;  // no candidate attains this minimum: no certificate
    sc.add_row(std::move(row), Relation::GreaterEqual, 1.0);
  }
  SolverResult r = solve_milp(sc, options.solver);
  cert.nodes += r.node_count;
  cert.iterations += r.iterations;
  if (r.status != SolveStatus::Optimal) return cert;
  if (r.objective_value > cover_budget + 0.5) return cert;
  std::vector<int> chosen;
  for (int idx = 0; idx < C; ++idx)
    if (r.solution[static_cast<std::size_t>(idx)] > 0.5) chosen.push_back(idx);
  cert.cover = std::move(chosen);
  return cert;
}

struct GreedySubset {
  double value = 0.0;  // sum of nearest distances over the greedy rows
  double max_d = 0.0;  // largest row-observation distance in the subset
};

// Greedy upper bound: the best sum of nearest distances achievable with
// `budget` candidate rows (used as an objective cut by the fallback MILP).
GreedySubset greedy_subset_value(const CompactnessCertificate& cert,
                                 const ProblemInstance& p, int budget) {
  const int K = static_cast<int>(p.obs.points.size());
  const int C = static_cast<int>(cert.candidates.size());
  std::vector<std::vector<double>> slack(static_cast<std::size_t>(C),
                                         std::vector<double>(static_cast<std::size_t>(K)));
  for (int r = 0; r < C; ++r)
    for (int k = 0; k < K; ++k)
      slack[static_cast<std::size_t>(r)][static_cast<std::size_t>(k)] =
          slack_distance(cert.candidates[static_cast<std::size_t>(r)],
                         p.obs.points[static_cast<std::size_t>(k)]);
  std::vector<double> best_so_far(static_cast<std::size_t>(K), kInf);
  GreedySubset out;
  for (int step = 0; step < budget; ++step) {
    int best_r = -1;
    double best_total = kInf;
    for (int r = 0; r < C; ++r) {
      double total = 0.0;
      for (int k = 0; k < K; ++k)
        total += std::min(best_so_far[static_cast<std::size_t>(k)],
                          slack[static_cast<std::size_t>(r)][static_cast<std::size_t>(k)]);
      if (total < best_total - 1e-12) {
        best_total = total;
        best_r = r;
      }
    }
    for (int k = 0; k < K; ++k) {
      best_so_far[static_cast<std::size_t>(k)] =
          std::min(best_so_far[static_cast<std::size_t>(k)],
                   slack[static_cast<std::size_t>(best_r)][static_cast<std::size_t>(k)]);
      out.max_d = std::max(out.max_d,
                           slack[static_cast<std::size_t>(best_r)][static_cast<std::size_t>(k)]);
    }
  }
  for (double v : best_so_far) out.value += v;
  return out;
}

std::vector<ConstraintRow> rows_from_cover(const CompactnessCertificate& cert, int m1) {
  std::vector<ConstraintRow> rows;
  for (int idx : *cert.cover) rows.push_back(cert.candidates[static_cast<std::size_t>(idx)]);
  while (static_cast<int>(rows.size()) < m1) rows.push_back(rows.front());
  return rows;
}

ImputedRegion compactness_milp(const ProblemInstance& p, std::optional<double> big_m,
                               const ImputeOptions& options,
                               const CompactnessCertificate* cert) {
  const double M = big_m.value_or(default_big_m(p.obs));
  if (M <= 0.0) throw Error("compactness: big-M must be positive");
  Joint J = make_joint_base(p);
  CompactnessVars cv;
  std::optional<double> ub;
  GreedySubset greedy;
  if (cert) {
    greedy = greedy_subset_value(*cert, p, p.m1);
    ub = greedy.value + 1e-7;
  }
  const LinExpr e = extend_compactness(J, p, M, cert ? &cert->d_star : nullptr, ub,
                                       p.side_constraints.empty(), cv);
  set_objective(J.model, e);
  SolverResult r = solve_milp(J.model, options.solver);
  if (r.status == SolveStatus::Infeasible && cert) {
    // The objective cut encodes a concretely achievable row set; if the
    // relaxation cannot reach it, M cannot express that set's distances.
    std::ostringstream msg;
    msg << "compactness: M = " << M << " cannot express an achievable optimum "
        << "(distances up to " << greedy.max_d << " must relax); retry with a larger M";
    throw BigMTooSmall(msg.str(), 2.0 * greedy.max_d + 10.0);
  }
  if (r.status != SolveStatus::Optimal) throw_solver_failure(r.status, "compactness");

  std::vector<ConstraintRow> rows = joint_rows_from_solution(J, r.solution, p.normalization);

  auto distance = [&](int i, int k) {
    return slack_distance(rows[static_cast<std::size_t>(i)],
                          p.obs.points[static_cast<std::size_t>(k)]);
  };
  auto max_distance = [&]() {
    double d = 0.0;
    for (int i = 0; i < J.m1; ++i)
      for (int k = 0; k < J.K; ++k) d = std::max(d, distance(i, k));
    return d;
  };

  // Layer 1: if M clipped a relaxed pair, some auxiliary distance stays
  // inflated above the true nearest distance and the evaluated loss falls
  // short of the solver objective.
  double loss = evaluate_loss(p, rows, LossSpec::compactness(big_m));
  if (loss < r.objective_value - 1e-6) {
    std::ostringstream msg;
    msg << "compactness: big-M relaxation inflated the objective (value "
        << r.objective_value << " vs evaluated " << loss << " with M = " << M
        << "); retry with a larger M";
    throw BigMTooSmall(msg.str(), 2.0 * max_distance() + 10.0);
  }
  if (loss > r.objective_value + 1e-6)
    throw Error("internal: compactness loss recomputation mismatch");

  // Layer 2: the binaries fix which row serves which observation; rebuild
  // each serving row as the smallest-total-slack admissible row that keeps
  // its served distances, and duplicate a serving row over the idle ones.
  // This strips relaxation-plane artifacts (rows parked at distance M) from
  // the representative without moving the optimum.
  std::vector<double> dmin(static_cast<std::size_t>(J.K), kInf);
  for (int k = 0; k < J.K; ++k)
    for (int i = 0; i < J.m1; ++i)
      dmin[static_cast<std::size_t>(k)] =
          std::min(dmin[static_cast<std::size_t>(k)], distance(i, k));
  std::vector<std::vector<int>> serve(static_cast<std::size_t>(J.m1));
  for (int k = 0; k < J.K; ++k)
    for (int i = 0; i < J.m1; ++i)
      if (distance(i, k) <= dmin[static_cast<std::size_t>(k)] + kCoverTol)
        serve[static_cast<std::size_t>(i)].push_back(k);
  int anchor = -1;
  for (int i = 0; i < J.m1; ++i) {
    if (serve[static_cast<std::size_t>(i)].empty()) continue;
    if (anchor < 0) anchor = i;
    RowVars v;
    SolverModel rm = make_row_model(p, rows[static_cast<std::size_t>(i)].tag.sigma, i, v);
    set_objective(rm, row_total_slack_expr(p, v));
    for (int k : serve[static_cast<std::size_t>(i)])
      pin_expr(rm, row_slack_at_expr(p, v, k),
               dmin[static_cast<std::size_t>(k)] + kCoverTol);
    SolverResult pr = require_optimal(solve_auto(rm, options.solver),
                                      "compactness row rebuild");
    std::vector<double> a(pr.solution.begin() + v.a0, pr.solution.begin() + v.a0 + p.n);
    rows[static_cast<std::size_t>(i)] =
        to_normalized_row(a, pr.solution[static_cast<std::size_t>(v.b)], p.normalization);
  }
  for (int i = 0; i < J.m1; ++i)
    if (serve[static_cast<std::size_t>(i)].empty())
      rows[static_cast<std::size_t>(i)] = rows[static_cast<std::size_t>(anchor)];
  snap_offsets(p, rows);

  // Layer 3: every non-nearest distance must clear M with margin, otherwise
  // the relaxation had no room and the optimum is suspect.
  bool audit_failed = false;
  for (int k = 0; k < J.K; ++k) {
    double lo = kInf;
    for (int i = 0; i < J.m1; ++i) lo = std::min(lo, distance(i, k));
    for (int i = 0; i < J.m1; ++i)
      if (distance(i, k) > lo + kCoverTol && distance(i, k) > M - kAuditMargin)
        audit_failed = true;
  }
  if (audit_failed) {
    std::ostringstream msg;
    msg << "compactness: big-M audit failed (a relaxed distance reached "
        << max_distance() << " against M = " << M << "); retry with a larger M";
    throw BigMTooSmall(msg.str(), 2.0 * max_distance() + 10.0);
  }

  loss = evaluate_loss(p, rows, LossSpec::compactness(big_m));
  if (std::abs(loss - r.objective_value) > 1e-6)
    throw Error("internal: compactness loss recomputation mismatch");
  std::vector<RowDiagnostics> diags = uniform_diags(rows, loss, r.node_count, r.iterations);
  return finish(p, rows, std::move(diags), loss, {}, options);
}

}  // namespace

ImputedRegion impute_compactness(const ProblemInstance& p, std::optional<double> big_m,
                                 const ImputeOptions& options) {
  validate_problem(p);
  if (p.side_constraints.empty()) {
    CompactnessCertificate cert = compactness_certificate(p, options, p.m1);
    if (!options.force_milp && cert.cover) {
      std::vector<ConstraintRow> rows = rows_from_cover(cert, p.m1);
      snap_offsets(p, rows);
      const double loss = evaluate_loss(p, rows, LossSpec::compactness(big_m));
      if (loss > cert.lower_bound + 1e-6)
        throw Error("internal: compactness cover exceeds its certified bound");
      std::vector<RowDiagnostics> diags =
          uniform_diags(rows, loss, cert.nodes, cert.iterations);
      return finish(p, rows, std::move(diags), loss, {}, options);
    }
    return compactness_milp(p, big_m, options, &cert);
  }
  return compactness_milp(p, big_m, options, nullptr);
}

// ---------------------------------------------------------------------------
// Sequential (combined) losses.
// ---------------------------------------------------------------------------

namespace {

void validate_sequence(const ProblemInstance& p, const std::vector<LossSpec>& losses) {
  if (losses.empty()) throw Error("combined: empty loss sequence");
  for (const LossSpec& l : losses) {
    if (l.kind == LossSpec::Kind::Combined)
      throw Error("combined: nested sequential losses are not allowed");
    if (l.kind == LossSpec::Kind::Adherence) {
      if (l.distance == DistanceNorm::L2)
        throw Error("combined: the L2 adherence distance cannot be pinned linearly "
                    "between stages; use the L1 distance");
      if (static_cast<int>(l.prior.rows.size()) != p.m1)
        throw Error("combined: adherence stage prior must supply exactly m1 rows");
    }
  }
}

// Deterministic representative of the final optimal face: freeze the
// binaries, then row by row maximize b and steer the coefficients to
// alternating lexicographic extremes within each sign class. Any point on
// the face is optimal; this picks a spread-out canonical one.
std::vector<ConstraintRow> refine_joint(Joint J, const SolverResult& last,
                                        const ProblemInstance& p,
                                        const ImputeOptions& options) {
  std::vector<double> current = last.solution;
  for (std::size_t v = 0; v < J.model.integrality.size(); ++v) {
    if (J.model.integrality[v]) {
      const double val = std::round(current[v]);
      J.model.var_bounds[v] = VarBounds{val, val};
    }
  }
  std::fill(J.model.integrality.begin(), J.model.integrality.end(), 0);

  double box = 1.0;
  for (double x : current) box = std::max(box, std::abs(x));
  box = 1000.0 * (box + 1.0);
  for (int i = 0; i < J.m1; ++i) {
    for (int j = 0; j <= J.n; ++j) {
      const int var = (j < J.n) ? J.a(i, j) : J.b(i);
      VarBounds& bb = J.model.var_bounds[static_cast<std::size_t>(var)];
      bb.lower = std::max(bb.lower, -box);
      bb.upper = std::min(bb.upper, box);
    }
  }

  // As in refine_row: pin each stepped coordinate through its bounds with
  // one-sided kStepTol slack, keeping the basis well-conditioned while
  // absorbing the solver's arithmetic drift.
  auto step = [&](int var, bool minimize) {
    std::fill(J.model.objective.begin(), J.model.objective.end(), 0.0);
    J.model.objective[static_cast<std::size_t>(var)] = minimize ? 1.0 : -1.0;
    SolverResult r = require_optimal(solve_lp(J.model, options.solver),
                                     "sequential-loss refinement");
    VarBounds& bb = J.model.var_bounds[static_cast<std::size_t>(var)];
    const double val = r.solution[static_cast<std::size_t>(var)];
    if (minimize)
      bb.upper = std::min(bb.upper, val + kStepTol);
    else
      bb.lower = std::max(bb.lower, val - kStepTol);
    current = std::move(r.solution);
  };

  int class_count[2] = {0, 0};
  for (int i = 0; i < J.m1; ++i) {
    int cls = 0;
    if (J.scheme == NormalizationScheme::SumProxy)
      cls = current[static_cast<std::size_t>(J.z0 + i)] > 0.5 ? 1 : 0;
    const bool minimize_first = (class_count[cls]++ % 2) == 0;
    step(J.b(i), false);
    for (int j = 0; j < J.n; ++j) step(J.a(i, j), minimize_first);
  }
  return joint_rows_from_solution(J, current, p.normalization);
}

ImputedRegion combined_joint(const ProblemInstance& p, const std::vector<LossSpec>& losses,
                             double epsilon, const ImputeOptions& options) {
  Joint J = make_joint_base(p);
  std::vector<double> stage_losses;
  SolverResult last;
  long nodes = 0, iterations = 0;

  for (std::size_t t = 0; t < losses.size(); ++t) {
    const LossSpec& stage = losses[t];
    LinExpr e;
    switch (stage.kind) {
      case LossSpec::Kind::Indifference:
        // Constant loss: nothing to optimize or pin at this stage.
        stage_losses.push_back(0.0);
        continue;
      case LossSpec::Kind::Adjacency:
        e = extend_adjacency(J, p);
        break;
      case LossSpec::Kind::Fairness: {
        FairnessVars fv;
        e = extend_fairness(J, p, fv);
        break;
      }
      case LossSpec::Kind::Compactness: {
        CompactnessVars cv;
        e = extend_compactness(J, p, stage.big_m.value_or(default_big_m(p.obs)),
                               nullptr, std::nullopt, false, cv);
        break;
      }
      case LossSpec::Kind::Adherence: {
        Polyhedron norm_prior;
        norm_prior.n = p.n;
        for (const ConstraintRow& r : stage.prior.rows)
          norm_prior.rows.push_back(normalize_row(r, p.normalization));
        std::vector<double> w = stage.weights;
        if (w.empty()) w.assign(static_cast<std::size_t>(p.m1), 1.0);
        e = extend_adherence_l1(J, norm_prior, w);
        break;
      }
      case LossSpec::Kind::Combined:
        throw Error("combined: nested sequential losses are not allowed");
    }
    set_objective(J.model, e);
    SolverResult r = solve_milp(J.model, options.solver);
    if (r.status != SolveStatus::Optimal)
      throw Error("combined: stage " + std::to_string(t + 1) + " failed (" +
                  to_string(r.status) + ")");
    nodes += r.node_count;
    iterations += r.iterations;
    stage_losses.push_back(r.objective_value);
    pin_expr(J.model, e, r.objective_value + epsilon);
    last = std::move(r);
  }
  if (last.solution.empty()) {
    // Every stage was constant (indifference): any valid set is optimal.
    ImputedRegion base = impute_indifference(p, options);
    base.stage_losses = std::move(stage_losses);
    return base;
  }

  std::vector<ConstraintRow> rows = refine_joint(std::move(J), last, p, options);
  snap_offsets(p, rows);
  const double loss = evaluate_loss(p, rows, losses.back());
  std::vector<RowDiagnostics> diags = uniform_diags(rows, loss, nodes, iterations);
  return finish(p, rows, std::move(diags), loss, stage_losses, options);
}

// Staged reduction for the fairness-then-compactness sequence: the
// compactness optimum is certified row-cover + distance bound; the remaining
// row budget is filled with "ballast" rows chosen to restore the fairness
// pin. Falls back to the joint model when no ballast split works.
std::optional<ImputedRegion> try_fairness_then_compactness(
    const ProblemInstance& p, const std::vector<LossSpec>& losses, double epsilon,
    const ImputeOptions& options) {
  // Certified compactness cover; everything else builds on it.
  CompactnessCertificate cert = compactness_certificate(p, options, p.m1);
  if (!cert.cover) return std::nullopt;
  const std::vector<int>& cover = *cert.cover;
  const int ballast_budget = p.m1 - static_cast<int>(cover.size());

  std::vector<double> fixed(p.obs.points.size(), 0.0);
  for (int idx : cover)
    for (std::size_t k = 0; k < p.obs.points.size(); ++k)
      fixed[k] += slack_distance(cert.candidates[static_cast<std::size_t>(idx)],
                                 p.obs.points[k]);

  // Exact ballast, no LP: rows whose coefficients sum to the negated cover
  // coefficients make the aggregate slack constant across observations, so
  // the mean absolute deviation is exactly zero -- the unconstrained
  // fairness optimum -- while the cover still certifies the compactness
  // bound. The required sign split is integral exactly when m1 is even.
  if (ballast_budget >= 1) {
    int delta = 0;
    std::vector<double> a_star(static_cast<std::size_t>(p.n), 0.0);
    for (int idx : cover) {
      const ConstraintRow& r = cert.candidates[static_cast<std::size_t>(idx)];
      delta += r.tag.sigma;
      for (int j = 0; j < p.n; ++j) a_star[static_cast<std::size_t>(j)] -= r.a[static_cast<std::size_t>(j)];
    }
    const int plus = (ballast_budget - delta) % 2 == 0 ? (ballast_budget - delta) / 2 : -1;
    const int minus = ballast_budget - plus;
    if (plus >= 0 && minus >= 0) {
      std::vector<ConstraintRow> rows;
      for (int idx : cover) rows.push_back(cert.candidates[static_cast<std::size_t>(idx)]);
      auto push_copies = [&](const std::vector<double>& agg, int copies) {
        double bmin = kInf;
        for (const std::vector<double>& x : p.obs.points) bmin = std::min(bmin, dot(agg, x));
        std::vector<double> a(static_cast<std::size_t>(p.n));
        for (int j = 0; j < p.n; ++j)
          a[static_cast<std::size_t>(j)] = agg[static_cast<std::size_t>(j)] / copies;
        const ConstraintRow row = to_normalized_row(a, bmin / copies, p.normalization);
        rows.insert(rows.end(), static_cast<std::size_t>(copies), row);
      };
      if (plus == 0) {
        push_copies(a_star, minus);
      } else if (minus == 0) {
        push_copies(a_star, plus);
      } else {
        std::vector<double> u = a_star;
        u[0] += static_cast<double>(minus);
        std::vector<double> w(static_cast<std::size_t>(p.n), 0.0);
        w[0] = -static_cast<double>(minus);
        push_copies(u, plus);
        push_copies(w, minus);
      }
      snap_offsets(p, rows);
      const double mad = evaluate_fairness(p, rows);
      const double loss = evaluate_loss(p, rows, losses.back());
      if (mad <= 0.5 * epsilon && loss <= cert.lower_bound + 1e-6) {
        std::vector<RowDiagnostics> diags =
            uniform_diags(rows, loss, cert.nodes, cert.iterations);
        return finish(p, rows, std::move(diags), loss, {mad, loss}, options);
      }
    }
  }

  // Stage 1: global fairness optimum (aggregate form).
  double f1 = kInf;
  const std::vector<double> no_fixed;
  for (int plus = 0; plus <= p.m1; ++plus) {
    std::optional<BallastRows> r = solve_ballast(p, plus, p.m1 - plus, no_fixed, options);
    if (r && r->mad < f1) f1 = r->mad;
  }
  if (!std::isfinite(f1)) return std::nullopt;

  for (int plus = 0; plus <= ballast_budget; ++plus) {
    const int minus = ballast_budget - plus;
    std::optional<BallastRows> r = solve_ballast(p, plus, minus, fixed, options);
    if (!r) continue;
    if (r->mad > f1 + 0.5 * epsilon) continue;

    std::vector<ConstraintRow> rows;
    for (int idx : cover) rows.push_back(cert.candidates[static_cast<std::size_t>(idx)]);
    rows.insert(rows.end(), r->rows.begin(), r->rows.end());
    snap_offsets(p, rows);

    const double loss = evaluate_loss(p, rows, losses.back());
    if (loss > cert.lower_bound + 1e-6)
      throw Error("internal: sequential cover exceeds its certified bound");
    const double mad = evaluate_fairness(p, rows);
    if (mad > f1 + epsilon) continue;
    std::vector<RowDiagnostics> diags =
        uniform_diags(rows, loss, cert.nodes, cert.iterations + r->iterations);
    return finish(p, rows, std::move(diags), loss, {f1, loss}, options);
  }
  return std::nullopt;
}

}  // namespace

ImputedRegion impute_combined(const ProblemInstance& p, const std::vector<LossSpec>& losses,
                              double epsilon, const ImputeOptions& options) {
  validate_problem(p);
  validate_sequence(p, losses);
  if (epsilon < 0.0) throw Error("combined: epsilon must be nonnegative");

  if (!options.force_milp && p.normalization == NormalizationScheme::SumProxy &&
      p.side_constraints.empty() && losses.size() == 2 &&
      losses[0].kind == LossSpec::Kind::Fairness &&
      losses[1].kind == LossSpec::Kind::Compactness) {
    if (std::optional<ImputedRegion> r =
            try_fairness_then_compactness(p, losses, epsilon, options))
      return *r;
  }
  return combined_joint(p, losses, epsilon, options);
}

ImputedRegion impute(const ProblemInstance& p, const LossSpec& loss,
                     const ImputeOptions& options) {
  switch (loss.kind) {
    case LossSpec::Kind::Indifference: return impute_indifference(p, options);
    case LossSpec::Kind::Adjacency: return impute_adjacency(p, options);
    case LossSpec::Kind::Fairness: return impute_fairness(p, options);
    case LossSpec::Kind::Compactness: return impute_compactness(p, loss.big_m, options);
    case LossSpec::Kind::Adherence:
      return impute_adherence(p, loss.prior, loss.weights, loss.distance, options);
    case LossSpec::Kind::Combined:
      return impute_combined(p, loss.sequence, loss.epsilon, options);
  }
  throw Error("impute: unknown loss kind");
}

}  // namespace feasregion
