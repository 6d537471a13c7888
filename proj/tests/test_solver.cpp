#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "feasregion/solver.hpp"
#include "oracles.hpp"

using namespace feasregion;

namespace {

SolverModel box_model(std::vector<double> objective,
                      std::vector<std::pair<double, double>> bounds) {
  SolverModel m = SolverModel::with_free_vars(static_cast<int>(objective.size()));
  m.objective = std::move(objective);
  for (std::size_t j = 0; j < bounds.size(); ++j)
    m.var_bounds[j] = {bounds[j].first, bounds[j].second};
  return m;
}

constexpr double kInf = std::numeric_limits<double>::infinity();

struct StatusCase {
  const char* name;
  SolverModel model;
  SolveStatus status;
  double value;  // meaningful for Optimal only
};

std::vector<StatusCase> status_corpus() {
  std::vector<StatusCase> cases;

  {
    SolverModel m = box_model({1.0}, {{-kInf, kInf}});
    m.add_row({1.0}, Relation::GreaterEqual, 1.0);
    m.add_row({1.0}, Relation::LessEqual, 2.0);
    cases.push_back({"interval min", m, SolveStatus::Optimal, 1.0});
  }
  {
    SolverModel m = box_model({-1.0}, {{0.0, 5.0}});
    cases.push_back({"bound max", m, SolveStatus::Optimal, -5.0});
  }
  {
    SolverModel m = box_model({1.0}, {{-kInf, kInf}});
    cases.push_back({"free unbounded", m, SolveStatus::Unbounded, 0.0});
  }
  {
    SolverModel m = box_model({1.0}, {{-kInf, kInf}});
    m.add_row({1.0}, Relation::GreaterEqual, 2.0);
    m.add_row({1.0}, Relation::LessEqual, 1.0);
    cases.push_back({"contradictory rows", m, SolveStatus::Infeasible, 0.0});
  }
  {
    SolverModel m = box_model({1.0, 1.0}, {{0.0, kInf}, {0.0, kInf}});
    m.add_row({1.0, 1.0}, Relation::GreaterEqual, 2.0);
    cases.push_back({"diagonal floor", m, SolveStatus::Optimal, 2.0});
  }
  {
    SolverModel m = box_model({-1.0, -1.0}, {{0.0, kInf}, {0.0, kInf}});
    m.add_row({1.0, 1.0}, Relation::LessEqual, 3.0);
    cases.push_back({"diagonal cap", m, SolveStatus::Optimal, -3.0});
  }
  {
    // Redundant rows piled on one vertex (primal degeneracy).
    SolverModel m = box_model({1.0, 2.0}, {{0.0, kInf}, {0.0, kInf}});
    m.add_row({1.0, 0.0}, Relation::GreaterEqual, 1.0);
    m.add_row({1.0, 0.0}, Relation::GreaterEqual, 1.0);
    m.add_row({1.0, 1.0}, Relation::GreaterEqual, 1.0);
    m.add_row({2.0, 0.0}, Relation::GreaterEqual, 2.0);
    cases.push_back({"degenerate vertex", m, SolveStatus::Optimal, 1.0});
  }
  {
    SolverModel m = box_model({3.0, -1.0}, {{-kInf, kInf}, {-kInf, kInf}});
    m.add_row({1.0, 1.0}, Relation::Equal, 2.0);
    m.add_row({1.0, -1.0}, Relation::Equal, 0.0);
    cases.push_back({"two equalities", m, SolveStatus::Optimal, 2.0});
  }
  {
    SolverModel m = box_model({-1.0, 0.0}, {{0.0, kInf}, {0.0, kInf}});
    m.add_row({0.0, 1.0}, Relation::LessEqual, 1.0);
    cases.push_back({"ray escape", m, SolveStatus::Unbounded, 0.0});
  }
  {
    SolverModel m = box_model({0.0, 0.0}, {{1.0, 2.0}, {1.0, 2.0}});
    cases.push_back({"zero objective", m, SolveStatus::Optimal, 0.0});
  }
  {
    SolverModel m = box_model({1.0}, {{-5.0, -2.0}});
    cases.push_back({"negative box", m, SolveStatus::Optimal, -5.0});
  }
  {
    SolverModel m = box_model({1.0}, {{-kInf, kInf}});
    m.add_row({1.0}, Relation::GreaterEqual, -7.0);
    cases.push_back({"free var negative floor", m, SolveStatus::Optimal, -7.0});
  }
  {
    SolverModel m = box_model({1.0, 1.0}, {{-kInf, kInf}, {-kInf, kInf}});
    m.add_row({1.0, 1.0}, Relation::Equal, 2.0);
    m.add_row({2.0, 2.0}, Relation::Equal, 4.0);  // consistent duplicate
    m.add_row({1.0, 0.0}, Relation::GreaterEqual, 0.0);
    cases.push_back({"redundant equalities", m, SolveStatus::Optimal, 2.0});
  }
  {
    SolverModel m = box_model({1.0, 1.0}, {{-kInf, kInf}, {-kInf, kInf}});
    m.add_row({1.0, 1.0}, Relation::Equal, 2.0);
    m.add_row({1.0, 1.0}, Relation::Equal, 3.0);
    cases.push_back({"inconsistent equalities", m, SolveStatus::Infeasible, 0.0});
  }
  {
    // Zero-rhs surplus rows start on their own columns (crash basis path).
    SolverModel m = box_model({1.0, 1.0}, {{0.0, kInf}, {0.0, kInf}});
    m.add_row({1.0, -1.0}, Relation::GreaterEqual, 0.0);
    m.add_row({-1.0, 2.0}, Relation::GreaterEqual, 0.0);
    m.add_row({1.0, 1.0}, Relation::GreaterEqual, 3.0);
    cases.push_back({"zero rhs crash", m, SolveStatus::Optimal, 3.0});
  }
  {
    SolverModel m = box_model({1e6, -1e-4}, {{0.0, kInf}, {0.0, 1e5}});
    m.add_row({1e3, 1.0}, Relation::GreaterEqual, 1e3);
    cases.push_back({"mixed scales", m, SolveStatus::Optimal, -10.0});
  }
  {
    SolverModel m = box_model({-2.0, -3.0}, {{0.0, kInf}, {0.0, kInf}});
    m.add_row({1.0, 2.0}, Relation::LessEqual, 14.0);
    m.add_row({3.0, -1.0}, Relation::GreaterEqual, 0.0);
    m.add_row({1.0, -1.0}, Relation::LessEqual, 2.0);
    cases.push_back({"three cuts", m, SolveStatus::Optimal, -24.0});
  }
  {
    // Symmetric costs: pricing ties broken by index, still optimal.
    SolverModel m = box_model({-1.0, -1.0, -1.0},
                              {{0.0, kInf}, {0.0, kInf}, {0.0, kInf}});
    m.add_row({1.0, 1.0, 1.0}, Relation::LessEqual, 6.0);
    cases.push_back({"symmetric tie", m, SolveStatus::Optimal, -6.0});
  }
  {
    SolverModel m = box_model({0.0, 0.0}, {{0.0, kInf}, {0.0, kInf}});
    m.add_row({1.0, 1.0}, Relation::LessEqual, -1.0);
    cases.push_back({"negative cap on nonnegatives", m, SolveStatus::Infeasible, 0.0});
  }
  {
    SolverModel m = box_model({5.0, 4.0, 3.0},
                              {{0.0, kInf}, {0.0, kInf}, {0.0, kInf}});
    m.add_row({2.0, 3.0, 1.0}, Relation::GreaterEqual, 5.0);
    m.add_row({4.0, 1.0, 2.0}, Relation::GreaterEqual, 11.0);
    m.add_row({3.0, 4.0, 2.0}, Relation::GreaterEqual, 8.0);
    cases.push_back({"three ge rows", m, SolveStatus::Optimal, 13.75});
  }

  return cases;
}

}  // namespace

TEST_CASE("LP status corpus classifies and values exactly") {
  const auto corpus = status_corpus();
  REQUIRE(corpus.size() == 20);
  for (const auto& c : corpus) {
    CAPTURE(c.name);
    const SolverResult res = solve_lp(c.model);
    CHECK(res.status == c.status);
    if (c.status == SolveStatus::Optimal) {
      CHECK(res.objective_value == doctest::Approx(c.value).epsilon(1e-9));
      // The reported point must actually attain the reported value.
      double attained = 0.0;
      for (int j = 0; j < c.model.num_vars; ++j)
        attained += c.model.objective[j] * res.solution[j];
      CHECK(attained == doctest::Approx(res.objective_value).epsilon(1e-9));
    }
  }
}

TEST_CASE("LP solves are deterministic") {
  for (const auto& c : status_corpus()) {
    const SolverResult a = solve_lp(c.model);
    const SolverResult b = solve_lp(c.model);
    CHECK(a.status == b.status);
    CHECK(a.objective_value == b.objective_value);
    CHECK(a.solution == b.solution);
    CHECK(a.iterations == b.iterations);
  }
}

TEST_CASE("LP duals certify optimality on inequality models") {
  // max-flow-flavored LP: strong duality ties primal and dual objectives.
  SolverModel m = SolverModel::with_free_vars(3);
  m.objective = {2.0, 3.0, 1.5};
  for (auto& vb : m.var_bounds) vb = {0.0, kInf};
  m.add_row({1.0, 2.0, 1.0}, Relation::GreaterEqual, 4.0);
  m.add_row({2.0, 1.0, 3.0}, Relation::GreaterEqual, 5.0);
  m.add_row({1.0, 1.0, 1.0}, Relation::LessEqual, 10.0);
  const SolverResult res = solve_lp(m);
  REQUIRE(res.status == SolveStatus::Optimal);
  CHECK(res.dual_objective == doctest::Approx(res.objective_value).epsilon(1e-8));
  REQUIRE(res.row_duals.size() == 3);
  // Sign conventions: >= rows carry nonnegative duals, <= rows nonpositive.
  CHECK(res.row_duals[0] >= -1e-9);
  CHECK(res.row_duals[1] >= -1e-9);
  CHECK(res.row_duals[2] <= 1e-9);
  // Dual feasibility: A'y <= c on nonnegative variables.
  for (int j = 0; j < 3; ++j) {
    double lhs = 0.0;
    for (std::size_t i = 0; i < m.rows.size(); ++i)
      lhs += m.rows[i].coeffs[j] * res.row_duals[i];
    CHECK(lhs <= m.objective[j] + 1e-8);
  }
}

TEST_CASE("LP duals on zero-rhs rows keep their sign convention") {
  SolverModel m = SolverModel::with_free_vars(2);
  m.objective = {1.0, 2.0};
  for (auto& vb : m.var_bounds) vb = {0.0, kInf};
  m.add_row({1.0, -1.0}, Relation::GreaterEqual, 0.0);  // crash-basis row
  m.add_row({1.0, 1.0}, Relation::GreaterEqual, 2.0);
  const SolverResult res = solve_lp(m);
  REQUIRE(res.status == SolveStatus::Optimal);
  CHECK(res.dual_objective == doctest::Approx(res.objective_value).epsilon(1e-8));
  CHECK(res.row_duals[0] >= -1e-9);
  CHECK(res.row_duals[1] >= -1e-9);
}

TEST_CASE("MILP equals exhaustive enumeration") {
  std::mt19937 rng(20240817);
  std::uniform_real_distribution<double> weight(1.0, 9.0);
  std::uniform_real_distribution<double> value(1.0, 9.0);

  for (int inst = 0; inst < 12; ++inst) {
    const int items = 4 + inst % 7;  // 4..10 binaries
    SolverModel m = SolverModel::with_free_vars(items);
    m.integrality.assign(items, 1);
    double cap = 0.0;
    for (int j = 0; j < items; ++j) {
      m.var_bounds[j] = {0.0, 1.0};
      m.objective[j] = -value(rng);  // maximize value
    }
    std::vector<double> w(items);
    for (int j = 0; j < items; ++j) {
      w[j] = weight(rng);
      cap += w[j];
    }
    m.add_row(w, Relation::LessEqual, 0.5 * cap);

    CAPTURE(inst);
    const SolverResult fast = solve_milp(m);
    const SolverResult slow = oracles::milp_by_enumeration(m);
    REQUIRE(fast.status == slow.status);
    if (fast.status == SolveStatus::Optimal)
      CHECK(fast.objective_value ==
            doctest::Approx(slow.objective_value).epsilon(1e-7));
  }
}

TEST_CASE("MILP with continuous variables and equality coupling") {
  // Facility-style: open y_i to allow x_i, meet demand, minimize cost.
  SolverModel m = SolverModel::with_free_vars(6);  // x0..x2, y0..y2
  m.objective = {1.0, 2.0, 1.5, 4.0, 3.0, 5.0};
  m.integrality = {0, 0, 0, 1, 1, 1};
  for (int j = 0; j < 3; ++j) m.var_bounds[j] = {0.0, kInf};
  for (int j = 3; j < 6; ++j) m.var_bounds[j] = {0.0, 1.0};
  for (int j = 0; j < 3; ++j) {
    std::vector<double> link(6, 0.0);
    link[j] = -1.0;
    link[3 + j] = 7.0;
    m.add_row(std::move(link), Relation::GreaterEqual, 0.0);  // x_j <= 7 y_j
  }
  m.add_row({1.0, 1.0, 1.0, 0.0, 0.0, 0.0}, Relation::GreaterEqual, 10.0);

  const SolverResult fast = solve_milp(m);
  const SolverResult slow = oracles::milp_by_enumeration(m);
  REQUIRE(fast.status == SolveStatus::Optimal);
  CHECK(fast.objective_value ==
        doctest::Approx(slow.objective_value).epsilon(1e-7));
}

TEST_CASE("MILP infeasible and node-cap statuses") {
  SolverModel m = SolverModel::with_free_vars(3);
  m.objective = {1.0, 1.0, 1.0};
  m.integrality = {1, 1, 1};
  for (auto& vb : m.var_bounds) vb = {0.0, 1.0};
  m.add_row({1.0, 1.0, 1.0}, Relation::GreaterEqual, 3.5);
  CHECK(solve_milp(m).status == SolveStatus::Infeasible);

  SolverModel k = SolverModel::with_free_vars(8);
  k.integrality.assign(8, 1);
  std::vector<double> w;
  for (int j = 0; j < 8; ++j) {
    k.var_bounds[j] = {0.0, 1.0};
    k.objective[j] = -(j + 1.0);
    w.push_back(3.0 + ((j * 5) % 7));
  }
  k.add_row(w, Relation::LessEqual, 11.0);
  SolverOptions strangled;
  strangled.node_cap = 1;
  CHECK(solve_milp(k, strangled).status == SolveStatus::IterationLimit);
}

TEST_CASE("QP active set matches the grid oracle") {
  SUBCASE("separable with box") {
    SolverModel m = SolverModel::with_free_vars(3);
    m.objective = {-2.0, -4.0, 1.0};
    m.quadratic_diag = std::vector<double>{1.0, 2.0, 0.5};
    for (auto& vb : m.var_bounds) vb = {-3.0, 3.0};
    const SolverResult fast = solve_qp_activeset(m);
    const SolverResult slow = oracles::qp_by_grid(m);
    REQUIRE(fast.status == SolveStatus::Optimal);
    CHECK(fast.objective_value ==
          doctest::Approx(slow.objective_value).epsilon(1e-6));
  }
  SUBCASE("halfspace pushes the minimum onto a face") {
    SolverModel m = SolverModel::with_free_vars(2);
    m.objective = {0.0, 0.0};
    m.quadratic_diag = std::vector<double>{1.0, 1.0};
    for (auto& vb : m.var_bounds) vb = {-5.0, 5.0};
    m.add_row({1.0, 1.0}, Relation::GreaterEqual, 2.0);  // projects origin onto x+y=2
    const SolverResult fast = solve_qp_activeset(m);
    const SolverResult slow = oracles::qp_by_grid(m);
    REQUIRE(fast.status == SolveStatus::Optimal);
    CHECK(fast.objective_value ==
          doctest::Approx(slow.objective_value).epsilon(1e-6));
    CHECK(fast.solution[0] == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(fast.solution[1] == doctest::Approx(1.0).epsilon(1e-6));
  }
  SUBCASE("three variables, two rows") {
    SolverModel m = SolverModel::with_free_vars(3);
    m.objective = {1.0, -1.0, 2.0};
    m.quadratic_diag = std::vector<double>{2.0, 1.0, 3.0};
    for (auto& vb : m.var_bounds) vb = {-4.0, 4.0};
    m.add_row({1.0, 1.0, 0.0}, Relation::LessEqual, 1.0);
    m.add_row({0.0, 1.0, 1.0}, Relation::GreaterEqual, -1.0);
    const SolverResult fast = solve_qp_activeset(m);
    const SolverResult slow = oracles::qp_by_grid(m);
    REQUIRE(fast.status == SolveStatus::Optimal);
    CHECK(fast.objective_value ==
          doctest::Approx(slow.objective_value).epsilon(1e-6));
  }
}

TEST_CASE("QP guard rejects oversized instances") {
  SolverModel m = SolverModel::with_free_vars(17);
  m.quadratic_diag = std::vector<double>(17, 1.0);
  CHECK_THROWS_AS((void)solve_qp_activeset(m), SizeGuardError);
}

TEST_CASE("model validation rejects shape mismatches") {
  SolverModel m = SolverModel::with_free_vars(2);
  m.add_row({1.0}, Relation::GreaterEqual, 0.0);  // short row
  CHECK_THROWS_AS(validate_model(m), DimensionError);

  SolverModel q = SolverModel::with_free_vars(2);
  q.quadratic_diag = std::vector<double>{1.0};  // short diagonal
  CHECK_THROWS_AS(validate_model(q), DimensionError);
}
