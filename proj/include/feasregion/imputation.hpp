#pragma once

#include <optional>
#include <string>
#include <vector>

#include "feasregion/forward.hpp"
#include "feasregion/polyhedra.hpp"
#include "feasregion/solver.hpp"

namespace feasregion {

/// Thrown when per-row side constraints contradict observation feasibility or
/// normalization, leaving no admissible row.
class InfeasibleImputation : public Error {
 public:
  using Error::Error;
};

/// Thrown after a compactness solve whose big-M audit failed: some relaxed
/// row distance reached the M threshold, so the optimum is untrustworthy.
/// `suggested` carries a value large enough for the observed distances.
class BigMTooSmall : public Error {
 public:
  BigMTooSmall(const std::string& msg, double suggested_value)
      : Error(msg), suggested(suggested_value) {}
  double suggested;
};

enum class DistanceNorm { L1, L2 };

/// A linear restriction on one unknown row's coefficients:
/// coeff_a' a_i + coeff_b * b_i  (rel)  rhs.
struct SideConstraint {
  int row_index = 0;
  std::vector<double> coeff_a;
  double coeff_b = 0.0;
  Relation rel = Relation::Equal;
  double rhs = 0.0;
};

/// Everything the imputation needs: cost, observations, known constraints
/// (which must already contain every observation), and the number of unknown
/// rows to infer.
struct ProblemInstance {
  int n = 0;
  std::vector<double> c;
  ObservationSet obs;
  Polyhedron known;  // G rows only; the cost half-space is added separately
  int m1 = 1;
  NormalizationScheme normalization = NormalizationScheme::SumProxy;
  std::vector<SideConstraint> side_constraints;
};

/// Validates dimensions, a nonzero cost, observation/known-set consistency
/// (every observation must satisfy the known rows), and side-constraint
/// shapes. Throws Error/DimensionError with a specific message.
void validate_problem(const ProblemInstance& p);

/// Tagged selection of the objective shaping the unknown rows.
struct LossSpec {
  enum class Kind { Adherence, Indifference, Adjacency, Fairness, Compactness, Combined };
  Kind kind = Kind::Indifference;

  // Adherence
  Polyhedron prior;             // m1 rows; normalized on entry
  std::vector<double> weights;  // per row, >= 0; empty means all ones
  DistanceNorm distance = DistanceNorm::L1;

  // Compactness
  std::optional<double> big_m;

  // Combined
  std::vector<LossSpec> sequence;  // non-Combined entries only
  double epsilon = 1e-7;

  static LossSpec indifference();
  static LossSpec adjacency();
  static LossSpec fairness();
  static LossSpec compactness(std::optional<double> big_m = std::nullopt);
  static LossSpec adherence(Polyhedron prior, std::vector<double> weights = {},
                            DistanceNorm distance = DistanceNorm::L1);
  static LossSpec combined(std::vector<LossSpec> sequence, double epsilon = 1e-7);
};

/// Per-row solve summary: sign branch chosen, the row subproblem's objective
/// (or the joint objective for joint solves), and solver effort.
struct RowDiagnostics {
  int sigma = 0;
  double subproblem_objective = 0.0;
  long nodes = 0;
  long iterations = 0;
};

/// Result of an imputation: the inferred rows, the known set S (cost
/// half-space first), the optimal loss, and the verification that the
/// assembled region contains every observation and makes the preferred one
/// optimal.
struct ImputedRegion {
  std::vector<ConstraintRow> imputed_rows;
  Polyhedron known_set_S;
  double loss_value = 0.0;
  std::vector<double> stage_losses;  // per-stage optima for sequential losses
  std::vector<RowDiagnostics> per_row_diagnostics;
  VerificationReport verification;

  /// The region {x : imputed rows hold, x in S}.
  Polyhedron full_region() const;
};

struct ImputeOptions {
  SolverOptions solver;
  /// Route fairness/compactness through their literal one-shot MILP
  /// formulations even when a decomposed solve is available (used to
  /// cross-check the fast paths).
  bool force_milp = false;
};

/// S = {c'x >= c'x0} followed by the known rows, unchanged.
Polyhedron build_known_set(const std::vector<double>& c, const std::vector<double>& x0,
                           const Polyhedron& known, NormalizationScheme scheme);

/// Concatenates S with the imputed rows into one region.
Polyhedron assemble_region(const std::vector<ConstraintRow>& rows, const Polyhedron& S);

/// Default relaxation constant for the compactness reformulation.
double default_big_m(const ObservationSet& obs);

/// Dispatcher over the loss kinds below.
ImputedRegion impute(const ProblemInstance& p, const LossSpec& loss,
                     const ImputeOptions& options = {});

ImputedRegion impute_indifference(const ProblemInstance& p,
                                  const ImputeOptions& options = {});
ImputedRegion impute_adherence(const ProblemInstance& p, const Polyhedron& prior,
                               std::vector<double> weights, DistanceNorm distance,
                               const ImputeOptions& options = {});
ImputedRegion impute_adjacency(const ProblemInstance& p,
                               const ImputeOptions& options = {});
ImputedRegion impute_fairness(const ProblemInstance& p,
                              const ImputeOptions& options = {});
ImputedRegion impute_compactness(const ProblemInstance& p,
                                 std::optional<double> big_m,
                                 const ImputeOptions& options = {});
ImputedRegion impute_combined(const ProblemInstance& p,
                              const std::vector<LossSpec>& losses, double epsilon,
                              const ImputeOptions& options = {});

}  // namespace feasregion
