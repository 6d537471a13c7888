#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "feasregion/solver.hpp"

namespace feasregion {

/// Thrown when a row cannot be rescaled to the requested normalization
/// (sum-proxy with a zero coefficient sum, or an all-zero row).
class NormalizationDegenerate : public Error {
 public:
  using Error::Error;
};

/// Thrown by region_vertices_2d when no point satisfies all rows.
class EmptyRegion : public Error {
 public:
  using Error::Error;
};

/// Row-normalization schemes. SumProxy pins the coefficient sum to +1 or -1;
/// L1Exact pins the L1 norm of the coefficients to 1.
enum class NormalizationScheme { SumProxy, L1Exact };

enum class RowTagKind { SumProxy, L1Exact, None };

/// Records which normalization a row satisfies; sigma is the sign of the
/// coefficient sum for SumProxy rows and 0 otherwise.
struct NormalizationTag {
  RowTagKind kind = RowTagKind::None;
  int sigma = 0;

  static NormalizationTag none() { return {RowTagKind::None, 0}; }
  static NormalizationTag sum_proxy(int sigma) { return {RowTagKind::SumProxy, sigma}; }
  static NormalizationTag l1_exact() { return {RowTagKind::L1Exact, 0}; }

  bool operator==(const NormalizationTag&) const = default;
};

/// One linear inequality a'x >= b.
struct ConstraintRow {
  std::vector<double> a;
  double b = 0.0;
  NormalizationTag tag = NormalizationTag::none();

  bool operator==(const ConstraintRow&) const = default;
};

/// H-representation: the set {x : a_r'x >= b_r for every row r}.
struct Polyhedron {
  int n = 0;
  std::vector<ConstraintRow> rows;

  void add_row(std::vector<double> a, double b,
               NormalizationTag tag = NormalizationTag::none());
  bool operator==(const Polyhedron&) const = default;
};

/// Feasible points of the unknown forward problem; preferred_index marks the
/// observation with the smallest cost.
struct ObservationSet {
  std::vector<std::vector<double>> points;
  int preferred_index = 0;

  int dimension() const;
  const std::vector<double>& preferred() const { return points[preferred_index]; }
};

/// Builds an ObservationSet with preferred_index set by preferred_observation.
ObservationSet make_observation_set(std::vector<std::vector<double>> points,
                                    const std::vector<double>& c);

/// Index of the lowest-cost observation; ties break to the lowest index.
/// Rejects an empty set, a zero cost vector, and mismatched dimensions.
int preferred_observation(const std::vector<std::vector<double>>& points,
                          const std::vector<double>& c);

/// The half-space {x : c'x >= c'x0} as a row normalized under `scheme`.
ConstraintRow half_space_of_cost(const std::vector<double>& c,
                                 const std::vector<double>& x0,
                                 NormalizationScheme scheme);

/// Rescales (a, b) by a positive factor so the scheme invariant holds; the
/// half-space is unchanged as a set. Throws NormalizationDegenerate when the
/// scheme cannot represent the row (sum-proxy with zero coefficient sum).
ConstraintRow normalize_row(const ConstraintRow& row, NormalizationScheme scheme);

/// Verifies the row's tag invariant within 1e-9 (used by validity checks).
bool row_tag_holds(const ConstraintRow& row);

/// a'x - b: the linear surplus of x in the row (negative when x violates it).
double slack_distance(const ConstraintRow& row, const std::vector<double>& x);

struct Violation {
  int row = 0;
  int observation = 0;
  double amount = 0.0;  // positive magnitude of the shortfall
};

struct ValidityReport {
  bool valid = true;
  double worst_violation = 0.0;
  std::vector<Violation> violations;
};

/// True iff every observation satisfies every row within 1e-7; the report
/// lists each failing (row, observation) pair with its shortfall.
ValidityReport is_valid_set(const Polyhedron& P, const ObservationSet& obs);

/// Axis-aligned clipping box for plotting and vertex extraction of unbounded
/// regions.
struct Viewport {
  double xmin = 0.0, xmax = 1.0, ymin = 0.0, ymax = 1.0;
};

/// Vertices of a 2-D region in counter-clockwise order, deduplicated at 1e-7,
/// starting from the lexicographically smallest vertex. When `clip` is given
/// the region is intersected with the viewport first; otherwise the region
/// must be bounded. Throws EmptyRegion when no feasible point exists.
std::vector<std::array<double, 2>> region_vertices_2d(
    const Polyhedron& P, const std::optional<Viewport>& clip = std::nullopt);

/// True when some vertex of the clipped region lies on the viewport border,
/// i.e. the drawing truncates the region.
bool region_touches_viewport(const std::vector<std::array<double, 2>>& vertices,
                             const Viewport& vp);

std::string to_string(NormalizationScheme s);
NormalizationScheme normalization_scheme_from_string(const std::string& s);

}  // namespace feasregion
