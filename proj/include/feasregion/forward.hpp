#pragma once

#include <vector>

#include "feasregion/polyhedra.hpp"
#include "feasregion/solver.hpp"

namespace feasregion {

/// The optimization problem min c'x over a polyhedral region.
struct ForwardProblem {
  std::vector<double> c;
  Polyhedron region;
};

/// Outcome of checking an imputed region against the observations: the region
/// must contain every observation, make the preferred one optimal, and keep
/// every tagged row on its normalization.
struct VerificationReport {
  bool primal_feasible = false;
  double worst_violation = 0.0;
  bool x0_optimal = false;
  bool normalization_ok = false;
  double forward_optimum = 0.0;
  std::vector<int> co_optimal_observations;

  bool all_true() const { return primal_feasible && x0_optimal && normalization_ok; }
};

/// Dual multipliers certifying the preferred observation's optimality: y over
/// the imputed rows (all zero) and w over the known rows (supported on the
/// cost half-space row alone).
struct DualCertificate {
  std::vector<double> y;
  std::vector<double> w;
};

/// Solves min c'x over the region; Infeasible/Unbounded pass through as
/// statuses, not errors.
SolverResult solve_forward(const ForwardProblem& fp,
                           const SolverOptions& options = {});

/// Checks feasibility of all observations (1e-7), optimality of the preferred
/// one (|forward optimum - c'x0| <= 1e-6), and row-tag integrity; lists every
/// observation whose cost ties the preferred one within 1e-6.
VerificationReport verify_imputation(const Polyhedron& region,
                                     const ObservationSet& obs,
                                     const std::vector<double>& c,
                                     const SolverOptions& options = {});

/// Builds the optimality certificate for an assembled region whose known part
/// starts with the cost half-space row: y = 0 on the `num_imputed` rows and
/// w = (t, 0, ..., 0) on the known rows, with t the factor mapping the stored
/// first row back onto (c, c'x0). Satisfies A'y + G'w = c and b'y + h'w = c'x0.
DualCertificate reconstruct_duals(const Polyhedron& known_set_S, int num_imputed,
                                  const std::vector<double>& c);

/// Worst-case preferred point over the infinity-norm box of the given radius
/// around x0: each coordinate moves by -radius * sign(c_j).
std::vector<double> robust_preferred_box(const std::vector<double>& x0,
                                         double radius,
                                         const std::vector<double>& c);

}  // namespace feasregion
