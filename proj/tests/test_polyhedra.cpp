#include <array>
#include <cmath>

#include "doctest.h"
#include "feasregion/polyhedra.hpp"

using namespace feasregion;

TEST_CASE("normalize_row pins the coefficient sum to a unit sign") {
  const ConstraintRow row{{3.0, 1.0}, 8.0, NormalizationTag::none()};
  const ConstraintRow out = normalize_row(row, NormalizationScheme::SumProxy);
  CHECK(out.a[0] == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(out.a[1] == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(out.b == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(out.tag == NormalizationTag::sum_proxy(1));
  CHECK(row_tag_holds(out));

  const ConstraintRow neg = normalize_row({{-2.0, -6.0}, 4.0, {}},
                                          NormalizationScheme::SumProxy);
  CHECK(neg.tag == NormalizationTag::sum_proxy(-1));
  CHECK(neg.a[0] + neg.a[1] == doctest::Approx(-1.0).epsilon(1e-12));
  // The scale factor is positive, so the half-space is unchanged.
  CHECK(neg.b == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("normalize_row pins the L1 norm under the exact scheme") {
  const ConstraintRow out = normalize_row({{3.0, -1.0}, 2.0, {}},
                                          NormalizationScheme::L1Exact);
  CHECK(std::abs(out.a[0]) + std::abs(out.a[1]) ==
        doctest::Approx(1.0).epsilon(1e-12));
  CHECK(out.tag == NormalizationTag::l1_exact());
  CHECK(out.b == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(row_tag_holds(out));
}

TEST_CASE("normalize_row rejects rows the scheme cannot express") {
  CHECK_THROWS_AS(
      (void)normalize_row({{1.0, -1.0}, 0.0, {}}, NormalizationScheme::SumProxy),
      NormalizationDegenerate);
  CHECK_THROWS_AS(
      (void)normalize_row({{0.0, 0.0}, 1.0, {}}, NormalizationScheme::L1Exact),
      NormalizationDegenerate);
}

TEST_CASE("half_space_of_cost passes through the preferred observation") {
  const std::vector<double> c{-1.0, -1.0};
  const std::vector<double> x0{2.0, 2.0};
  const ConstraintRow row = half_space_of_cost(c, x0, NormalizationScheme::SumProxy);
  // c'x >= c'x0 rescaled onto sum -1: (-0.5, -0.5 | -2).
  CHECK(row.a[0] == doctest::Approx(-0.5).epsilon(1e-12));
  CHECK(row.a[1] == doctest::Approx(-0.5).epsilon(1e-12));
  CHECK(row.b == doctest::Approx(-2.0).epsilon(1e-12));
  CHECK(slack_distance(row, x0) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("preferred_observation picks the lowest cost, ties to lowest index") {
  const std::vector<std::vector<double>> pts{{1, 1}, {2, 2}, {0, 3}, {3, 0}};
  CHECK(preferred_observation(pts, {-1.0, -1.0}) == 1);
  CHECK(preferred_observation(pts, {1.0, 1.0}) == 0);   // 2 vs 2 vs 3 vs 3
  CHECK(preferred_observation(pts, {1.0, 0.0}) == 2);
  CHECK_THROWS_AS((void)preferred_observation({}, {1.0}), Error);
  CHECK_THROWS_AS((void)preferred_observation(pts, {0.0, 0.0}), Error);
  CHECK_THROWS_AS((void)preferred_observation(pts, {1.0}), DimensionError);
}

TEST_CASE("is_valid_set reports each violating pair") {
  Polyhedron P;
  P.n = 2;
  P.add_row({1.0, 0.0}, 1.5);   // x1 >= 1.5
  P.add_row({0.0, 1.0}, 0.0);   // x2 >= 0
  ObservationSet obs = make_observation_set({{2, 1}, {1, 2}, {0.5, 3}}, {1.0, 1.0});
  const ValidityReport report = is_valid_set(P, obs);
  CHECK(!report.valid);
  REQUIRE(report.violations.size() == 2);
  CHECK(report.violations[0].row == 0);
  CHECK(report.violations[0].observation == 1);
  CHECK(report.violations[0].amount == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(report.violations[1].observation == 2);
  CHECK(report.worst_violation == doctest::Approx(1.0).epsilon(1e-12));

  P.rows[0].b = 0.5;
  CHECK(is_valid_set(P, obs).valid);
}

TEST_CASE("region_vertices_2d walks the unit square counter-clockwise") {
  Polyhedron P;
  P.n = 2;
  P.add_row({1.0, 0.0}, 0.0);
  P.add_row({-1.0, 0.0}, -1.0);
  P.add_row({0.0, 1.0}, 0.0);
  P.add_row({0.0, -1.0}, -1.0);
  const auto verts = region_vertices_2d(P);
  REQUIRE(verts.size() == 4);
  CHECK(verts[0][0] == doctest::Approx(0.0));
  CHECK(verts[0][1] == doctest::Approx(0.0));  // lexicographically smallest first
  CHECK(verts[1][0] == doctest::Approx(1.0));
  CHECK(verts[1][1] == doctest::Approx(0.0));
  CHECK(verts[2][0] == doctest::Approx(1.0));
  CHECK(verts[2][1] == doctest::Approx(1.0));
  CHECK(verts[3][0] == doctest::Approx(0.0));
  CHECK(verts[3][1] == doctest::Approx(1.0));
}

TEST_CASE("region_vertices_2d clips unbounded regions to the viewport") {
  Polyhedron P;
  P.n = 2;
  P.add_row({1.0, 0.0}, 1.0);  // x1 >= 1, open in three directions
  const Viewport vp{0.0, 4.0, 0.0, 4.0};
  const auto verts = region_vertices_2d(P, vp);
  REQUIRE(verts.size() == 4);
  CHECK(region_touches_viewport(verts, vp));

  Polyhedron box;
  box.n = 2;
  box.add_row({1.0, 0.0}, 1.0);
  box.add_row({-1.0, 0.0}, -2.0);
  box.add_row({0.0, 1.0}, 1.0);
  box.add_row({0.0, -1.0}, -2.0);
  CHECK(!region_touches_viewport(region_vertices_2d(box, vp), vp));
}

TEST_CASE("region_vertices_2d rejects an empty region") {
  Polyhedron P;
  P.n = 2;
  P.add_row({1.0, 0.0}, 2.0);
  P.add_row({-1.0, 0.0}, -1.0);
  CHECK_THROWS_AS((void)region_vertices_2d(P), EmptyRegion);
}

TEST_CASE("slack_distance is the signed surplus") {
  const ConstraintRow row{{0.5, 0.5}, 1.0, {}};
  CHECK(slack_distance(row, {2.0, 2.0}) == doctest::Approx(1.0));
  CHECK(slack_distance(row, {1.0, 1.0}) == doctest::Approx(0.0));
  CHECK(slack_distance(row, {0.0, 0.0}) == doctest::Approx(-1.0));
}

TEST_CASE("normalization scheme names round-trip") {
  CHECK(to_string(NormalizationScheme::SumProxy) == "sum-proxy");
  CHECK(to_string(NormalizationScheme::L1Exact) == "l1-exact");
  CHECK(normalization_scheme_from_string("sum-proxy") ==
        NormalizationScheme::SumProxy);
  CHECK(normalization_scheme_from_string("l1-exact") ==
        NormalizationScheme::L1Exact);
  CHECK_THROWS_AS((void)normalization_scheme_from_string("l2"), Error);
}
