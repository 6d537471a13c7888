#include "feasregion/polyhedra.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace feasregion {

namespace {

constexpr double kValidityTol = 1e-7;
constexpr double kNormTol = 1e-9;
constexpr double kVertexDedupeTol = 1e-7;

void require_dimension(std::size_t got, std::size_t want, const char* what) {
  if (got != want)
    throw DimensionError(std::string(what) + ": expected dimension " +
                         std::to_string(want) + ", got " + std::to_string(got));
}

bool is_zero_vector(const std::vector<double>& v) {
  for (double x : v)
    if (x != 0.0) return false;
  return true;
}

}  // namespace

void Polyhedron::add_row(std::vector<double> a, double b, NormalizationTag tag) {
  require_dimension(a.size(), static_cast<std::size_t>(n), "Polyhedron::add_row");
  rows.push_back(ConstraintRow{std::move(a), b, tag});
}

int ObservationSet::dimension() const {
  return points.empty() ? 0 : static_cast<int>(points.front().size());
}

int preferred_observation(const std::vector<std::vector<double>>& points,
                          const std::vector<double>& c) {
  if (points.empty()) throw Error("preferred_observation: no observations given");
  if (is_zero_vector(c)) throw Error("preferred_observation: cost vector is zero");
  const std::size_t n = c.size();
  int best = 0;
  double best_cost = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < points.size(); ++k) {
    require_dimension(points[k].size(), n, "preferred_observation");
    double cost = 0.0;
    for (std::size_t j = 0; j < n; ++j) cost += c[j] * points[k][j];
    if (cost < best_cost) {
      best_cost = cost;
      best = static_cast<int>(k);
    }
  }
  return best;
}

ObservationSet make_observation_set(std::vector<std::vector<double>> points,
                                    const std::vector<double>& c) {
  ObservationSet obs;
  obs.preferred_index = preferred_observation(points, c);
  obs.points = std::move(points);
  return obs;
}

ConstraintRow normalize_row(const ConstraintRow& row, NormalizationScheme scheme) {
  if (is_zero_vector(row.a))
    throw NormalizationDegenerate("normalize_row: all-zero coefficient vector");
  ConstraintRow out;
  if (scheme == NormalizationScheme::SumProxy) {
    double sum = 0.0;
    for (double v : row.a) sum += v;
    if (std::abs(sum) <= kNormTol)
      throw NormalizationDegenerate(
          "normalize_row: coefficient sum is zero; such a hyperplane is "
          "representable only under the l1-exact scheme");
    const double scale = 1.0 / std::abs(sum);
    out.a.reserve(row.a.size());
    for (double v : row.a) out.a.push_back(v * scale);
    out.b = row.b * scale;
    out.tag = NormalizationTag::sum_proxy(sum > 0.0 ? 1 : -1);
  } else {
    double l1 = 0.0;
    for (double v : row.a) l1 += std::abs(v);
    if (l1 <= kNormTol)
      throw NormalizationDegenerate("normalize_row: coefficient vector is numerically zero");
    const double scale = 1.0 / l1;
    out.a.reserve(row.a.size());
    for (double v : row.a) out.a.push_back(v * scale);
    out.b = row.b * scale;
    out.tag = NormalizationTag::l1_exact();
  }
  return out;
}

bool row_tag_holds(const ConstraintRow& row) {
  switch (row.tag.kind) {
    case RowTagKind::None:
      return true;
    case RowTagKind::SumProxy: {
      if (row.tag.sigma != 1 && row.tag.sigma != -1) return false;
      double sum = 0.0;
      for (double v : row.a) sum += v;
      return std::abs(sum - row.tag.sigma) <= kNormTol;
    }
    case RowTagKind::L1Exact: {
      double l1 = 0.0;
      for (double v : row.a) l1 += std::abs(v);
      return std::abs(l1 - 1.0) <= kNormTol;
    }
  }
  return false;
}

ConstraintRow half_space_of_cost(const std::vector<double>& c,
                                 const std::vector<double>& x0,
                                 NormalizationScheme scheme) {
  if (is_zero_vector(c)) throw Error("half_space_of_cost: cost vector is zero");
  require_dimension(x0.size(), c.size(), "half_space_of_cost");
  double cx0 = 0.0;
  for (std::size_t j = 0; j < c.size(); ++j) cx0 += c[j] * x0[j];
  return normalize_row(ConstraintRow{c, cx0, NormalizationTag::none()}, scheme);
}

double slack_distance(const ConstraintRow& row, const std::vector<double>& x) {
  require_dimension(x.size(), row.a.size(), "slack_distance");
  double s = -row.b;
  for (std::size_t j = 0; j < x.size(); ++j) s += row.a[j] * x[j];
  return s;
}

ValidityReport is_valid_set(const Polyhedron& P, const ObservationSet& obs) {
  ValidityReport report;
  for (std::size_t k = 0; k < obs.points.size(); ++k)
    require_dimension(obs.points[k].size(), static_cast<std::size_t>(P.n),
                      "is_valid_set");
  for (std::size_t r = 0; r < P.rows.size(); ++r) {
    for (std::size_t k = 0; k < obs.points.size(); ++k) {
      const double s = slack_distance(P.rows[r], obs.points[k]);
      if (s < -kValidityTol) {
        report.valid = false;
        report.violations.push_back(
            Violation{static_cast<int>(r), static_cast<int>(k), -s});
        report.worst_violation = std::max(report.worst_violation, -s);
      }
    }
  }
  return report;
}

namespace {

// Feasibility within tolerance against every row of P (plus optional viewport).
bool point_feasible(const Polyhedron& P, const std::optional<Viewport>& clip,
                    double x, double y) {
  for (const ConstraintRow& row : P.rows) {
    if (row.a[0] * x + row.a[1] * y - row.b < -kValidityTol) return false;
  }
  if (clip) {
    if (x < clip->xmin - kValidityTol || x > clip->xmax + kValidityTol) return false;
    if (y < clip->ymin - kValidityTol || y > clip->ymax + kValidityTol) return false;
  }
  return true;
}

}  // namespace

std::vector<std::array<double, 2>> region_vertices_2d(
    const Polyhedron& P, const std::optional<Viewport>& clip) {
  if (P.n != 2) throw DimensionError("region_vertices_2d: requires n = 2");

  // Assemble the working rows: region rows plus viewport rows when clipping.
  std::vector<ConstraintRow> rows = P.rows;
  if (clip) {
    rows.push_back(ConstraintRow{{1.0, 0.0}, clip->xmin, NormalizationTag::none()});
    rows.push_back(ConstraintRow{{-1.0, 0.0}, -clip->xmax, NormalizationTag::none()});
    rows.push_back(ConstraintRow{{0.0, 1.0}, clip->ymin, NormalizationTag::none()});
    rows.push_back(ConstraintRow{{0.0, -1.0}, -clip->ymax, NormalizationTag::none()});
  }

  // Emptiness and (without a viewport) boundedness are decided by LP.
  SolverModel base = SolverModel::with_free_vars(2);
  for (const ConstraintRow& row : rows)
    base.add_row(row.a, Relation::GreaterEqual, row.b);
  {
    SolverModel feas = base;
    feas.objective = {0.0, 0.0};
    if (solve_lp(feas).status == SolveStatus::Infeasible)
      throw EmptyRegion("region_vertices_2d: no point satisfies all rows");
  }
  if (!clip) {
    for (const std::vector<double>& dir :
         {std::vector<double>{1.0, 0.0}, {-1.0, 0.0}, {0.0, 1.0}, {0.0, -1.0}}) {
      SolverModel dirm = base;
      dirm.objective = dir;
      if (solve_lp(dirm).status == SolveStatus::Unbounded)
        throw Error(
            "region_vertices_2d: region is unbounded; pass a viewport to clip");
    }
  }

  // Candidate vertices: pairwise row intersections, kept when feasible.
  std::vector<std::array<double, 2>> verts;
  const std::size_t m = rows.size();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) {
      const double a11 = rows[i].a[0], a12 = rows[i].a[1];
      const double a21 = rows[j].a[0], a22 = rows[j].a[1];
      const double det = a11 * a22 - a12 * a21;
      if (std::abs(det) < 1e-12) continue;
      const double x = (rows[i].b * a22 - a12 * rows[j].b) / det;
      const double y = (a11 * rows[j].b - rows[i].b * a21) / det;
      if (point_feasible(P, clip, x, y)) verts.push_back({x, y});
    }
  }
  // Dedupe.
  std::vector<std::array<double, 2>> unique;
  for (const auto& v : verts) {
    bool seen = false;
    for (const auto& u : unique) {
      if (std::abs(u[0] - v[0]) <= kVertexDedupeTol &&
          std::abs(u[1] - v[1]) <= kVertexDedupeTol) {
        seen = true;
        break;
      }
    }
    if (!seen) unique.push_back(v);
  }
  if (unique.empty())
    throw EmptyRegion("region_vertices_2d: feasible but no vertex found");

  // Counter-clockwise order around the centroid, starting at the
  // lexicographically smallest vertex.
  double cx = 0.0, cy = 0.0;
  for (const auto& v : unique) {
    cx += v[0];
    cy += v[1];
  }
  cx /= static_cast<double>(unique.size());
  cy /= static_cast<double>(unique.size());
  std::sort(unique.begin(), unique.end(),
            [&](const std::array<double, 2>& p, const std::array<double, 2>& q) {
              const double ap = std::atan2(p[1] - cy, p[0] - cx);
              const double aq = std::atan2(q[1] - cy, q[0] - cx);
              if (ap != aq) return ap < aq;
              if (p[0] != q[0]) return p[0] < q[0];
              return p[1] < q[1];
            });
  std::size_t start = 0;
  for (std::size_t i = 1; i < unique.size(); ++i) {
    if (unique[i][0] < unique[start][0] - kVertexDedupeTol ||
        (std::abs(unique[i][0] - unique[start][0]) <= kVertexDedupeTol &&
         unique[i][1] < unique[start][1] - kVertexDedupeTol))
      start = i;
  }
  std::rotate(unique.begin(), unique.begin() + static_cast<std::ptrdiff_t>(start),
              unique.end());
  return unique;
}

bool region_touches_viewport(const std::vector<std::array<double, 2>>& vertices,
                             const Viewport& vp) {
  for (const auto& v : vertices) {
    if (std::abs(v[0] - vp.xmin) <= kVertexDedupeTol ||
        std::abs(v[0] - vp.xmax) <= kVertexDedupeTol ||
        std::abs(v[1] - vp.ymin) <= kVertexDedupeTol ||
        std::abs(v[1] - vp.ymax) <= kVertexDedupeTol)
      return true;
  }
  return false;
}

std::string to_string(NormalizationScheme s) {
  return s == NormalizationScheme::SumProxy ? "sum-proxy" : "l1-exact";
}

NormalizationScheme normalization_scheme_from_string(const std::string& s) {
  if (s == "sum-proxy") return NormalizationScheme::SumProxy;
  if (s == "l1-exact") return NormalizationScheme::L1Exact;
  throw Error("unknown normalization scheme '" + s +
              "' (expected \"sum-proxy\" or \"l1-exact\")");
}

}  // namespace feasregion
