#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace feasregion {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Input shapes disagree (vector lengths, row widths, bound counts).
class DimensionError : public Error {
 public:
  explicit DimensionError(const std::string& what) : Error(what) {}
};

/// The active-set QP refuses instances beyond its enumeration guard.
class SizeGuardError : public Error {
 public:
  explicit SizeGuardError(const std::string& what) : Error(what) {}
};

enum class Relation { GreaterEqual, LessEqual, Equal };

enum class SolveStatus { Optimal, Infeasible, Unbounded, IterationLimit };

std::string to_string(SolveStatus s);
std::string to_string(Relation r);

struct VarBounds {
  double lower;  // may be -infinity
  double upper;  // may be +infinity
};

struct SolverRow {
  std::vector<double> coeffs;
  Relation rel = Relation::GreaterEqual;
  double rhs = 0.0;
};

/// A dense minimization model: min x'Qx + c'x subject to linear rows and
/// variable bounds, with an optional binary mask. Q is diagonal and only
/// present for the quadratic path.
struct SolverModel {
  int num_vars = 0;
  std::vector<double> objective;                      // linear part, size num_vars
  std::optional<std::vector<double>> quadratic_diag;  // entrywise >= 0 when present
  std::vector<SolverRow> rows;
  std::vector<VarBounds> var_bounds;                  // size num_vars
  std::vector<std::uint8_t> integrality;              // size num_vars, 1 = binary

  /// Convenience: model with all variables free and continuous.
  static SolverModel with_free_vars(int num_vars);

  void add_row(std::vector<double> coeffs, Relation rel, double rhs);
};

struct SolverOptions {
  long lp_iteration_cap = 50000;
  long node_cap = 100000;
  /// Branch-and-bound prune-only upper bound: nodes whose relaxation bound is
  /// not below it are discarded and no solution at or above it is returned
  /// (such a search ends Infeasible). Encoding a known bound here instead of
  /// as a model row keeps near-tight rows out of the basis, where they breed
  /// ill-conditioning. Ignored by the pure LP/QP paths.
  double objective_cutoff = std::numeric_limits<double>::infinity();
};

struct SolverResult {
  SolveStatus status = SolveStatus::Infeasible;
  std::vector<double> solution;      // present iff status == Optimal
  double objective_value = 0.0;      // meaningful iff status == Optimal
  long node_count = 0;               // branch-and-bound nodes (0 for pure LP/QP)
  long iterations = 0;               // simplex pivots across all solves
  std::vector<double> row_duals;     // per model row, LP path only
  double dual_objective = 0.0;       // certificate value implied by the final basis
};

/// Validates shapes and flag consistency; throws DimensionError on mismatch.
void validate_model(const SolverModel& model);

/// Two-phase dense primal simplex. Deterministic: largest-coefficient pricing
/// with stable-pivot ties; a persistent degenerate plateau triggers exact
/// tableau rebuilds and fixed-seed randomized pivoting until it resolves, so
/// runs stay reproducible. Free variables are split internally. The model
/// must not carry integrality flags or a quadratic objective.
SolverResult solve_lp(const SolverModel& model, const SolverOptions& options = {});

/// Best-first branch and bound over the binary mask, branching on the most
/// fractional binary (ties to the lowest index). Returns IterationLimit once
/// the node cap is exceeded.
SolverResult solve_milp(const SolverModel& model, const SolverOptions& options = {});

/// Global minimizer of a convex diagonal QP by enumeration of active subsets
/// of the inequality rows: each subset yields one KKT equality solve and the
/// best primal- and dual-feasible candidate wins. Guarded to at most 16
/// variables and 24 inequality rows (SizeGuardError beyond that); within the
/// guard the enumeration is exhaustive, so worst-case cost grows binomially.
SolverResult solve_qp_activeset(const SolverModel& model, const SolverOptions& options = {});

/// Debug dump of a model as a JSON document (used when attaching an offending
/// subproblem to an error).
std::string model_to_json(const SolverModel& model);

}  // namespace feasregion
