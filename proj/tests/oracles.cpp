#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace oracles {

using feasregion::Relation;
using feasregion::SolveStatus;
using feasregion::SolverModel;
using feasregion::SolverOptions;
using feasregion::SolverResult;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Convex in t for fixed sign: grid bracket, then ternary refinement.
template <typename F>
double minimize_convex_1d(const F& f, double lo, double hi) {
  const int grid = 2000;
  double best_t = lo, best = f(lo);
  for (int i = 1; i <= grid; ++i) {
    const double t = lo + (hi - lo) * i / grid;
    const double v = f(t);
    if (v < best) {
      best = v;
      best_t = t;
    }
  }
  const double step = (hi - lo) / grid;
  double a = std::max(lo, best_t - 2.0 * step);
  double b = std::min(hi, best_t + 2.0 * step);
  for (int it = 0; it < 200; ++it) {
    const double m1 = a + (b - a) / 3.0;
    const double m2 = b - (b - a) / 3.0;
    if (f(m1) <= f(m2)) b = m2;
    else a = m1;
  }
  return std::min(best, f(0.5 * (a + b)));
}

double dot2(double t, double sigma, const std::vector<double>& x) {
  return t * x[0] + (sigma - t) * x[1];
}

double min_slack(double t, double sigma,
                 const std::vector<std::vector<double>>& points) {
  double lo = kInf;
  for (const auto& x : points) lo = std::min(lo, dot2(t, sigma, x));
  return lo;
}

double model_objective(const SolverModel& model, const std::vector<double>& x) {
  double v = 0.0;
  for (int j = 0; j < model.num_vars; ++j) {
    v += model.objective[j] * x[j];
    if (model.quadratic_diag) v += (*model.quadratic_diag)[j] * x[j] * x[j];
  }
  return v;
}

bool rows_feasible(const SolverModel& model, const std::vector<double>& x,
                   double tol) {
  for (const auto& row : model.rows) {
    double lhs = 0.0;
    for (int j = 0; j < model.num_vars; ++j) lhs += row.coeffs[j] * x[j];
    switch (row.rel) {
      case Relation::GreaterEqual:
        if (lhs < row.rhs - tol) return false;
        break;
      case Relation::LessEqual:
        if (lhs > row.rhs + tol) return false;
        break;
      case Relation::Equal:
        if (std::abs(lhs - row.rhs) > tol) return false;
        break;
    }
  }
  return true;
}

}  // namespace

double adjacency_row_loss_2d(const std::vector<std::vector<double>>& points,
                             double grid_radius) {
  const double K = static_cast<double>(points.size());
  double best = kInf;
  for (double sigma : {-1.0, 1.0}) {
    const auto f = [&](double t) {
      double total = 0.0;
      for (const auto& x : points) total += dot2(t, sigma, x);
      return total - K * min_slack(t, sigma, points);
    };
    best = std::min(best, minimize_convex_1d(f, -grid_radius, grid_radius));
  }
  return best;
}

double min_row_distance_2d(const std::vector<std::vector<double>>& points,
                           int k, double grid_radius) {
  double best = kInf;
  for (double sigma : {-1.0, 1.0}) {
    const auto f = [&](double t) {
      return dot2(t, sigma, points[k]) - min_slack(t, sigma, points);
    };
    best = std::min(best, minimize_convex_1d(f, -grid_radius, grid_radius));
  }
  return best;
}

double compactness_min_min_2d(const std::vector<std::vector<double>>& points,
                              double grid_radius) {
  double total = 0.0;
  for (std::size_t k = 0; k < points.size(); ++k)
    total += min_row_distance_2d(points, static_cast<int>(k), grid_radius);
  return total;
}

SolverResult milp_by_enumeration(const SolverModel& model,
                                 const SolverOptions& options) {
  std::vector<int> binaries;
  for (int j = 0; j < model.num_vars; ++j)
    if (j < static_cast<int>(model.integrality.size()) && model.integrality[j])
      binaries.push_back(j);

  SolverResult best;
  best.status = SolveStatus::Infeasible;
  const long combos = 1L << binaries.size();
  for (long mask = 0; mask < combos; ++mask) {
    SolverModel fixed = model;
    fixed.integrality.assign(model.num_vars, 0);
    for (std::size_t i = 0; i < binaries.size(); ++i) {
      const double bit = (mask >> i) & 1 ? 1.0 : 0.0;
      fixed.var_bounds[binaries[i]] = {bit, bit};
    }
    const SolverResult res = feasregion::solve_lp(fixed, options);
    if (res.status == SolveStatus::Unbounded) {
      best.status = SolveStatus::Unbounded;
      return best;
    }
    if (res.status != SolveStatus::Optimal) continue;
    if (best.status != SolveStatus::Optimal ||
        res.objective_value < best.objective_value) {
      best = res;
      best.status = SolveStatus::Optimal;
    }
    best.node_count += 1;
  }
  return best;
}

namespace {

// Shared joint scaffold: per row i, coefficients a_i (free), offset b_i
// (free), and a sign binary z_i with sum_j a_ij - 2 z_i = -1; feasibility of
// every observation on every row. Returns the index of a_i0 per row; b_i sits
// right after the coefficients, binaries at the end.
struct JointLayout {
  int a0(int i) const { return i * stride; }
  int b(int i) const { return i * stride + n; }
  int z_begin = 0;
  int n = 0;
  int stride = 0;
};

JointLayout joint_base(const feasregion::ProblemInstance& p, SolverModel& m) {
  JointLayout L;
  L.n = p.n;
  L.stride = p.n + 1;
  L.z_begin = p.m1 * L.stride;
  m = SolverModel::with_free_vars(L.z_begin + p.m1);
  m.integrality.assign(m.num_vars, 0);
  for (int i = 0; i < p.m1; ++i) {
    m.var_bounds[L.z_begin + i] = {0.0, 1.0};
    m.integrality[L.z_begin + i] = 1;
  }

  for (int i = 0; i < p.m1; ++i) {
    // Normalization: sum_j a_ij = 2 z_i - 1.
    std::vector<double> norm(m.num_vars, 0.0);
    for (int j = 0; j < p.n; ++j) norm[L.a0(i) + j] = 1.0;
    norm[L.z_begin + i] = -2.0;
    m.add_row(std::move(norm), Relation::Equal, -1.0);
    // Validity: a_i'x^k - b_i >= 0 for every observation.
    for (const auto& x : p.obs.points) {
      std::vector<double> row(m.num_vars, 0.0);
      for (int j = 0; j < p.n; ++j) row[L.a0(i) + j] = x[j];
      row[L.b(i)] = -1.0;
      m.add_row(std::move(row), Relation::GreaterEqual, 0.0);
    }
  }
  return L;
}

}  // namespace

double joint_adjacency_loss(const feasregion::ProblemInstance& p,
                            const SolverOptions& options) {
  SolverModel m;
  const JointLayout L = joint_base(p, m);
  const double K = static_cast<double>(p.obs.points.size());
  std::vector<double> sum_x(p.n, 0.0);
  for (const auto& x : p.obs.points)
    for (int j = 0; j < p.n; ++j) sum_x[j] += x[j];
  for (int i = 0; i < p.m1; ++i) {
    for (int j = 0; j < p.n; ++j) m.objective[L.a0(i) + j] = sum_x[j];
    m.objective[L.b(i)] = -K;
  }
  const SolverResult res = feasregion::solve_milp(m, options);
  if (res.status != SolveStatus::Optimal)
    throw feasregion::Error("joint adjacency reference did not solve");
  return res.objective_value;
}

double joint_adherence_l1_loss(const feasregion::ProblemInstance& p,
                               const feasregion::Polyhedron& normalized_prior,
                               std::vector<double> weights,
                               const SolverOptions& options) {
  if (weights.empty()) weights.assign(static_cast<std::size_t>(p.m1), 1.0);
  SolverModel m;
  const JointLayout L = joint_base(p, m);
  // Append |a_ij - ahat_ij| and |b_i - bhat_i| split variables.
  const int t_begin = m.num_vars;
  const int per_row = p.n + 1;
  m.num_vars += p.m1 * per_row;
  m.objective.resize(m.num_vars, 0.0);
  m.var_bounds.resize(m.num_vars, {0.0, kInf});
  m.integrality.resize(m.num_vars, 0);
  for (auto& row : m.rows) row.coeffs.resize(m.num_vars, 0.0);

  for (int i = 0; i < p.m1; ++i) {
    const auto& prior_row = normalized_prior.rows[i];
    for (int j = 0; j <= p.n; ++j) {
      const int t = t_begin + i * per_row + j;
      const int v = j < p.n ? L.a0(i) + j : L.b(i);
      const double target = j < p.n ? prior_row.a[j] : prior_row.b;
      m.objective[t] = weights[i];
      std::vector<double> above(m.num_vars, 0.0);
      above[t] = 1.0;
      above[v] = -1.0;
      m.add_row(std::move(above), Relation::GreaterEqual, -target);
      std::vector<double> below(m.num_vars, 0.0);
      below[t] = 1.0;
      below[v] = 1.0;
      m.add_row(std::move(below), Relation::GreaterEqual, target);
    }
  }
  const SolverResult res = feasregion::solve_milp(m, options);
  if (res.status != SolveStatus::Optimal)
    throw feasregion::Error("joint adherence reference did not solve");
  return res.objective_value;
}

SolverResult qp_by_grid(const SolverModel& model, double box_radius) {
  const int m = model.num_vars;
  std::vector<double> lo(m), hi(m);
  for (int j = 0; j < m; ++j) {
    lo[j] = std::max(model.var_bounds[j].lower, -box_radius);
    hi[j] = std::min(model.var_bounds[j].upper, box_radius);
  }

  SolverResult best;
  best.status = SolveStatus::Infeasible;
  std::vector<double> x(m), center(m);
  double best_value = kInf;

  // Coarse global pass over the whole box.
  const int coarse = 40;
  std::vector<int> idx(m, 0);
  for (;;) {
    for (int j = 0; j < m; ++j)
      x[j] = lo[j] + (hi[j] - lo[j]) * idx[j] / coarse;
    if (rows_feasible(model, x, 1e-7)) {
      const double v = model_objective(model, x);
      if (v < best_value) {
        best_value = v;
        center = x;
        best.status = SolveStatus::Optimal;
      }
    }
    int j = 0;
    while (j < m && ++idx[j] > coarse) idx[j++] = 0;
    if (j == m) break;
  }
  if (best.status != SolveStatus::Optimal) return best;

  // Local shrinking grids around the incumbent; the incumbent itself stays
  // in every window, so each pass is feasible.
  std::vector<double> half(m);
  for (int j = 0; j < m; ++j) half[j] = (hi[j] - lo[j]) / coarse;
  const int fine = 6;  // 13 points per axis
  for (int pass = 0; pass < 90; ++pass) {
    std::vector<int> off(m, -fine);
    std::vector<double> pass_center = center;
    for (;;) {
      for (int j = 0; j < m; ++j)
        x[j] = std::clamp(pass_center[j] + half[j] * off[j] / fine, lo[j], hi[j]);
      if (rows_feasible(model, x, 1e-9)) {
        const double v = model_objective(model, x);
        if (v < best_value) {
          best_value = v;
          center = x;
        }
      }
      int j = 0;
      while (j < m && ++off[j] > fine) off[j++] = -fine;
      if (j == m) break;
    }
    for (int j = 0; j < m; ++j) half[j] *= 0.65;
  }

  best.solution = center;
  best.objective_value = best_value;
  return best;
}

}  // namespace oracles
