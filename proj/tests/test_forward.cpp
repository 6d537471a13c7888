#include <cmath>

#include "doctest.h"
#include "feasregion/forward.hpp"
#include "feasregion/imputation.hpp"

using namespace feasregion;

namespace {

Polyhedron unit_square() {
  Polyhedron P;
  P.n = 2;
  P.add_row({1.0, 0.0}, 1.0);
  P.add_row({-1.0, 0.0}, -2.0);
  P.add_row({0.0, 1.0}, 1.0);
  P.add_row({0.0, -1.0}, -2.0);
  return P;
}

}  // namespace

TEST_CASE("solve_forward minimizes over the region") {
  const SolverResult res = solve_forward({{-1.0, -1.0}, unit_square()});
  REQUIRE(res.status == SolveStatus::Optimal);
  CHECK(res.objective_value == doctest::Approx(-4.0).epsilon(1e-9));
  CHECK(res.solution[0] == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(res.solution[1] == doctest::Approx(2.0).epsilon(1e-9));
}

TEST_CASE("solve_forward passes non-optimal statuses through") {
  Polyhedron empty;
  empty.n = 2;
  empty.add_row({1.0, 0.0}, 2.0);
  empty.add_row({-1.0, 0.0}, -1.0);
  CHECK(solve_forward({{1.0, 1.0}, empty}).status == SolveStatus::Infeasible);

  Polyhedron open;
  open.n = 2;
  open.add_row({1.0, 0.0}, 0.0);
  open.add_row({0.0, 1.0}, 0.0);
  CHECK(solve_forward({{-1.0, 0.0}, open}).status == SolveStatus::Unbounded);
}

TEST_CASE("verify_imputation accepts a correct region") {
  const std::vector<double> c{-1.0, -1.0};
  const ObservationSet obs = make_observation_set(
      {{2, 2}, {1, 1}, {1, 2}, {2, 1}, {1.5, 1.5}}, c);
  Polyhedron region = unit_square();
  // Tag one row and keep it consistent so the tag check participates.
  region.rows[0] = normalize_row(region.rows[0], NormalizationScheme::SumProxy);
  const VerificationReport rep = verify_imputation(region, obs, c);
  CHECK(rep.primal_feasible);
  CHECK(rep.worst_violation == doctest::Approx(0.0));
  CHECK(rep.x0_optimal);
  CHECK(rep.normalization_ok);
  CHECK(rep.forward_optimum == doctest::Approx(-4.0).epsilon(1e-9));
  CHECK(rep.all_true());
  // Only the preferred observation attains -4 on the square.
  REQUIRE(rep.co_optimal_observations.size() == 1);
  CHECK(rep.co_optimal_observations[0] == 0);
}

TEST_CASE("verify_imputation flags an excluded observation") {
  const std::vector<double> c{-1.0, -1.0};
  const ObservationSet obs = make_observation_set({{2, 2}, {0.5, 1}}, c);
  const VerificationReport rep = verify_imputation(unit_square(), obs, c);
  CHECK(!rep.primal_feasible);
  CHECK(rep.worst_violation == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(!rep.all_true());
}

TEST_CASE("verify_imputation flags a dominating point when the cost cap is missing") {
  const std::vector<double> c{-1.0, -1.0};
  const ObservationSet obs = make_observation_set({{2, 2}, {1, 1}}, c);
  Polyhedron region;  // x >= 1 box, open above: (3,3) beats (2,2)
  region.n = 2;
  region.add_row({1.0, 0.0}, 1.0);
  region.add_row({0.0, 1.0}, 1.0);
  const VerificationReport rep = verify_imputation(region, obs, c);
  CHECK(rep.primal_feasible);
  CHECK(!rep.x0_optimal);
  CHECK(!rep.all_true());
}

TEST_CASE("verify_imputation flags a tampered tag") {
  const std::vector<double> c{-1.0, -1.0};
  const ObservationSet obs = make_observation_set({{2, 2}, {1, 1}}, c);
  Polyhedron region = unit_square();
  region.rows[0].tag = NormalizationTag::sum_proxy(-1);  // sum is +1
  const VerificationReport rep = verify_imputation(region, obs, c);
  CHECK(!rep.normalization_ok);
  CHECK(!rep.all_true());
}

TEST_CASE("verify_imputation lists cost ties as co-optimal") {
  const std::vector<double> c{0.0, -1.0};
  // (1,2) and (2,2) tie at cost -2; (1,1) does not.
  const ObservationSet obs = make_observation_set({{1, 2}, {2, 2}, {1, 1}}, c);
  const VerificationReport rep = verify_imputation(unit_square(), obs, c);
  CHECK(rep.all_true());
  REQUIRE(rep.co_optimal_observations.size() == 2);
  CHECK(rep.co_optimal_observations[0] == 0);
  CHECK(rep.co_optimal_observations[1] == 1);
}

TEST_CASE("reconstruct_duals certifies optimality through the cost row") {
  const std::vector<double> c{-1.0, -1.0};
  const std::vector<double> x0{2.0, 2.0};
  Polyhedron known;
  known.n = 2;
  known.add_row({1.0, 1.0}, 1.0);
  const Polyhedron S =
      build_known_set(c, x0, known, NormalizationScheme::SumProxy);
  const DualCertificate cert = reconstruct_duals(S, 3, c);
  REQUIRE(cert.y.size() == 3);
  REQUIRE(cert.w.size() == S.rows.size());
  for (double yi : cert.y) CHECK(yi == 0.0);
  for (std::size_t i = 1; i < cert.w.size(); ++i) CHECK(cert.w[i] == 0.0);
  CHECK(cert.w[0] >= 0.0);
  // Stationarity: G'w = c on the known rows.
  for (int j = 0; j < 2; ++j) {
    double lhs = 0.0;
    for (std::size_t i = 0; i < S.rows.size(); ++i)
      lhs += S.rows[i].a[j] * cert.w[i];
    CHECK(lhs == doctest::Approx(c[j]).epsilon(1e-12));
  }
  // Complementary value: h'w = c'x0.
  double hw = 0.0;
  for (std::size_t i = 0; i < S.rows.size(); ++i) hw += S.rows[i].b * cert.w[i];
  CHECK(hw == doctest::Approx(-4.0).epsilon(1e-12));
}

TEST_CASE("robust_preferred_box shifts against the cost sign") {
  const auto moved = robust_preferred_box({2.0, 2.0, 2.0}, 0.25,
                                          {-1.0, 1.0, 0.0});
  CHECK(moved[0] == doctest::Approx(2.25));
  CHECK(moved[1] == doctest::Approx(1.75));
  CHECK(moved[2] == doctest::Approx(2.0));
}
