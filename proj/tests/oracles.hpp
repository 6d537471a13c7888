#pragma once

#include <vector>

#include "feasregion/imputation.hpp"
#include "feasregion/solver.hpp"

namespace oracles {

// Best adjacency objective for a single unknown row in n = 2 under the
// coefficient-sum normalization: coefficients (t, sigma - t) with b riding at
// the minimum slack over the points, scanned by a coarse grid and ternary
// refinement (the objective is convex in t for each sign). Independent of the
// library's row subproblem LPs.
double adjacency_row_loss_2d(const std::vector<std::vector<double>>& points,
                             double grid_radius = 25.0);

// Smallest slack any admissible row can give one observation in n = 2 under
// the coefficient-sum normalization (same parameterization as above); d*_k in
// the compactness bound. Convex in t per sign, so grid + ternary is exact to
// tolerance.
double min_row_distance_2d(const std::vector<std::vector<double>>& points,
                           int k, double grid_radius = 25.0);

// Sum of per-observation minimal distances: the compactness optimum whenever
// enough rows are available to serve every observation its own minimizer.
double compactness_min_min_2d(const std::vector<std::vector<double>>& points,
                              double grid_radius = 25.0);

// MILP reference: enumerate every assignment of the binary variables (at most
// 12), fix each binary to its value, solve the continuous relaxation, and
// keep the best feasible objective. Exercises none of the branch-and-bound
// machinery.
feasregion::SolverResult milp_by_enumeration(const feasregion::SolverModel& model,
                                             const feasregion::SolverOptions& options = {});

// QP reference for up to three variables: shrinking dense grid search over
// the variable box, keeping constraint-feasible points only. Exact to ~1e-7
// on convex instances whose optimum lies in the searched box.
feasregion::SolverResult qp_by_grid(const feasregion::SolverModel& model,
                                    double box_radius = 10.0);

// Joint m1-row references under the coefficient-sum normalization: one MILP
// over all rows at once, sign branches as binaries (sum over row i equal to
// 2 z_i - 1). The decomposition-equivalence property says these match the
// per-row solves. Adherence measures the L1 distance to an already-normalized
// prior; weights default to all ones when empty.
double joint_adjacency_loss(const feasregion::ProblemInstance& p,
                            const feasregion::SolverOptions& options = {});
double joint_adherence_l1_loss(const feasregion::ProblemInstance& p,
                               const feasregion::Polyhedron& normalized_prior,
                               std::vector<double> weights,
                               const feasregion::SolverOptions& options = {});

}  // namespace oracles
