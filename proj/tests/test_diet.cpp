#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "feasregion/diet.hpp"
#include "feasregion/forward.hpp"

using namespace feasregion;

namespace {

std::string read_all(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

void write_all(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

std::filesystem::path fresh_dir(const std::string& leaf) {
  const auto dir = std::filesystem::temp_directory_path() / "feasregion_tests" / leaf;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

// Serializes the dataset's bounds back to the config format, with one upper
// bound shrunk so reloading must either fail or relax.
std::string bounds_with_shrunk_upper(const DietDataset& ds, const std::string& nutrient) {
  std::ostringstream js;
  js.precision(17);
  js << "{";
  bool first = true;
  for (const auto& [name, nb] : ds.nutrient_bounds) {
    if (!first) js << ",";
    first = false;
    js << "\"" << name << "\":{";
    bool inner = true;
    if (nb.lower) {
      js << "\"lower\":" << *nb.lower;
      inner = false;
    }
    if (nb.upper) {
      if (!inner) js << ",";
      js << "\"upper\":" << (name == nutrient ? *nb.upper * 0.5 : *nb.upper);
    }
    js << "}";
  }
  if (ds.max_total_servings)
    js << ",\"max_total_servings\":" << *ds.max_total_servings;
  js << "}";
  return js.str();
}

}  // namespace

TEST_CASE("avg_l1_distance averages per-point L1 distances") {
  const std::vector<std::vector<double>> pts = {{0, 0}, {2, 2}};
  CHECK(avg_l1_distance(pts, {1, 1}) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(avg_l1_distance(pts, {0, 0}) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(avg_l1_distance(pts, {2, 2}) == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("synthetic generator is deterministic and round-trips through files") {
  const auto da = fresh_dir("gen_a");
  const auto db = fresh_dir("gen_b");
  const DietDataset a = generate_synthetic_dataset(42, 6, 12, 1.0, da.string());
  const DietDataset b = generate_synthetic_dataset(42, 6, 12, 1.0, db.string());
  CHECK(a.observations == b.observations);
  CHECK(a.nutrient_matrix == b.nutrient_matrix);
  CHECK(read_all(da / "observations.csv") == read_all(db / "observations.csv"));
  CHECK(read_all(da / "nutrients.csv") == read_all(db / "nutrients.csv"));
  CHECK(read_all(da / "bounds.json") == read_all(db / "bounds.json"));

  const DietDataset loaded =
      load_dataset((da / "observations.csv").string(), (da / "nutrients.csv").string(),
                   (da / "bounds.json").string());
  CHECK(loaded.foods == a.foods);
  CHECK(loaded.nutrients == a.nutrients);
  CHECK(loaded.observations == a.observations);       // exact doubles
  CHECK(loaded.nutrient_matrix == a.nutrient_matrix); // exact doubles
  CHECK(loaded.max_total_servings == a.max_total_servings);
  REQUIRE(loaded.nutrient_bounds.size() == a.nutrient_bounds.size());
  for (std::size_t i = 0; i < a.nutrient_bounds.size(); ++i) {
    CHECK(loaded.nutrient_bounds[i].first == a.nutrient_bounds[i].first);
    CHECK(loaded.nutrient_bounds[i].second.lower == a.nutrient_bounds[i].second.lower);
    CHECK(loaded.nutrient_bounds[i].second.upper == a.nutrient_bounds[i].second.upper);
  }

  // Every generated day skips one of the first three foods in rotation.
  for (int d = 0; d < a.num_days(); ++d) CHECK(a.observations[d][d % 3] == 0.0);
}

TEST_CASE("a violated bound names the nutrient and the day, or relaxes on request") {
  const auto dir = fresh_dir("bounds");
  const DietDataset a = generate_synthetic_dataset(42, 6, 12, 1.0, dir.string());
  write_all(dir / "shrunk.json", bounds_with_shrunk_upper(a, "sugar"));

  SUBCASE("strict load throws with a specific message") {
    try {
      (void)load_dataset((dir / "observations.csv").string(),
                         (dir / "nutrients.csv").string(),
                         (dir / "shrunk.json").string());
      FAIL("expected an Error");
    } catch (const Error& e) {
      const std::string msg = e.what();
      CHECK(msg.find("sugar") != std::string::npos);
      CHECK(msg.find("day") != std::string::npos);
    }
  }

  SUBCASE("auto-relax widens to the observed extreme and logs it") {
    const DietDataset relaxed = load_dataset(
        (dir / "observations.csv").string(), (dir / "nutrients.csv").string(),
        (dir / "shrunk.json").string(), /*auto_relax=*/true);
    REQUIRE(!relaxed.relax_log.empty());
    CHECK(relaxed.relax_log[0].find("sugar") != std::string::npos);

    const int j = relaxed.nutrient_index("sugar");
    REQUIRE(j >= 0);
    double observed_max = 0.0;
    for (int d = 0; d < relaxed.num_days(); ++d)
      observed_max = std::max(observed_max, relaxed.nutrient_totals(d)[j]);
    for (const auto& [name, nb] : relaxed.nutrient_bounds)
      if (name == "sugar") {
        REQUIRE(nb.upper.has_value());
        CHECK(*nb.upper == doctest::Approx(observed_max).epsilon(1e-12));
      }
  }
}

TEST_CASE("small case study improves closeness under both objectives") {
  for (DietObjective obj : {DietObjective::MinSodium, DietObjective::MaxProtein}) {
    CAPTURE(to_string(obj));
    DietDataset ds = generate_synthetic_dataset(7, 5, 10);
    ds.objective_kind = obj;
    const CaseStudyReport rep = run_case_study(ds, 8);
    CHECK(rep.imputation.verification.all_true());
    CHECK(rep.avg_l1_with <= rep.avg_l1_without + 1e-9);
    CHECK(rep.imputation.imputed_rows.size() == 8);
    CHECK(rep.per_food.size() == ds.foods.size());

    const Polyhedron known = ds.known_constraints();
    for (const auto& row : known.rows) {
      CHECK(slack_distance(row, rep.diet_without_mio) >= -1e-7);
      CHECK(slack_distance(row, rep.diet_with_mio) >= -1e-7);
    }
  }
}

TEST_CASE("full-scale case study stays verified under both objectives") {
  DietDataset ds = generate_synthetic_dataset(1, 26, 100);
  for (DietObjective obj : {DietObjective::MinSodium, DietObjective::MaxProtein}) {
    CAPTURE(to_string(obj));
    ds.objective_kind = obj;
    const CaseStudyReport rep = run_case_study(ds, 30);
    CHECK(rep.imputation.verification.all_true());
    CHECK(rep.avg_l1_with <= rep.avg_l1_without + 1e-9);

    const Polyhedron known = ds.known_constraints();
    for (const auto& row : known.rows) {
      CHECK(slack_distance(row, rep.diet_without_mio) >= -1e-7);
      CHECK(slack_distance(row, rep.diet_with_mio) >= -1e-7);
    }
  }
}

TEST_CASE("case study report renders deterministically") {
  DietDataset ds = generate_synthetic_dataset(7, 5, 10);
  const CaseStudyReport rep = run_case_study(ds, 4);
  const std::string once = render_case_study_report(rep, ds);
  const std::string twice = render_case_study_report(rep, ds);
  CHECK(once == twice);
  CHECK(once.find("avg_l1_with") != std::string::npos);
  CHECK(once.find(ds.foods[0]) != std::string::npos);
}

TEST_CASE("diet objective names round-trip") {
  CHECK(to_string(DietObjective::MaxProtein) == "max-protein");
  CHECK(to_string(DietObjective::MinSodium) == "min-sodium");
  CHECK(diet_objective_from_string("max-protein") == DietObjective::MaxProtein);
  CHECK(diet_objective_from_string("min-sodium") == DietObjective::MinSodium);
  CHECK_THROWS_AS((void)diet_objective_from_string("carbs"), Error);
}
