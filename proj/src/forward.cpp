#include "feasregion/forward.hpp"

#include <cmath>
#include <limits>

namespace feasregion {

namespace {

constexpr double kOptimalityTol = 1e-6;

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

SolverResult solve_forward(const ForwardProblem& fp, const SolverOptions& options) {
  if (fp.c.empty()) throw Error("solve_forward: empty cost vector");
  if (static_cast<int>(fp.c.size()) != fp.region.n)
    throw DimensionError("solve_forward: cost and region dimensions differ");
  SolverModel m = SolverModel::with_free_vars(fp.region.n);
  m.objective = fp.c;
  for (const ConstraintRow& row : fp.region.rows)
    m.add_row(row.a, Relation::GreaterEqual, row.b);
  return solve_lp(m, options);
}

VerificationReport verify_imputation(const Polyhedron& region,
                                     const ObservationSet& obs,
                                     const std::vector<double>& c,
                                     const SolverOptions& options) {
  VerificationReport report;

  const ValidityReport validity = is_valid_set(region, obs);
  report.primal_feasible = validity.valid;
  report.worst_violation = validity.worst_violation;

  report.normalization_ok = true;
  for (const ConstraintRow& row : region.rows)
    if (!row_tag_holds(row)) report.normalization_ok = false;

  const std::vector<double>& x0 = obs.preferred();
  const double cx0 = dot(c, x0);
  const SolverResult fwd = solve_forward(ForwardProblem{c, region}, options);
  if (fwd.status == SolveStatus::Optimal) {
    report.forward_optimum = fwd.objective_value;
    report.x0_optimal =
        report.primal_feasible && std::abs(fwd.objective_value - cx0) <= kOptimalityTol;
  } else {
    // Unbounded (or failed) forward problems cannot certify x0.
    report.forward_optimum = -std::numeric_limits<double>::infinity();
    report.x0_optimal = false;
  }

  for (std::size_t k = 0; k < obs.points.size(); ++k) {
    if (std::abs(dot(c, obs.points[k]) - cx0) <= kOptimalityTol)
      report.co_optimal_observations.push_back(static_cast<int>(k));
  }
  return report;
}

DualCertificate reconstruct_duals(const Polyhedron& known_set_S, int num_imputed,
                                  const std::vector<double>& c) {
  if (known_set_S.rows.empty())
    throw Error("reconstruct_duals: known set has no rows (cost half-space missing)");
  if (static_cast<int>(c.size()) != known_set_S.n)
    throw DimensionError("reconstruct_duals: cost dimension mismatch");
  if (num_imputed < 0) throw Error("reconstruct_duals: negative imputed-row count");

  const ConstraintRow& c_row = known_set_S.rows.front();
  // The stored first row is a positive rescale of c; recover the factor from
  // the largest-magnitude coefficient for numerical stability.
  std::size_t jstar = 0;
  for (std::size_t j = 1; j < c_row.a.size(); ++j)
    if (std::abs(c_row.a[j]) > std::abs(c_row.a[jstar])) jstar = j;
  if (c_row.a[jstar] == 0.0)
    throw Error("reconstruct_duals: first known row is the zero row");
  const double t = c[jstar] / c_row.a[jstar];
  if (t <= 0.0)
    throw Error("reconstruct_duals: first known row is not a positive rescale of c");
  for (std::size_t j = 0; j < c.size(); ++j) {
    if (std::abs(c_row.a[j] * t - c[j]) > 1e-6)
      throw Error("reconstruct_duals: first known row is not proportional to c");
  }

  DualCertificate cert;
  cert.y.assign(static_cast<std::size_t>(num_imputed), 0.0);
  cert.w.assign(known_set_S.rows.size(), 0.0);
  cert.w[0] = t;
  return cert;
}

std::vector<double> robust_preferred_box(const std::vector<double>& x0,
                                         double radius,
                                         const std::vector<double>& c) {
  if (radius < 0.0) throw Error("robust_preferred_box: negative radius");
  if (x0.size() != c.size())
    throw DimensionError("robust_preferred_box: dimension mismatch");
  std::vector<double> out(x0);
  for (std::size_t j = 0; j < out.size(); ++j) {
    if (c[j] > 0.0) out[j] -= radius;
    else if (c[j] < 0.0) out[j] += radius;
  }
  return out;
}

}  // namespace feasregion
