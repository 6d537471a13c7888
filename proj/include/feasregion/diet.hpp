#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "feasregion/imputation.hpp"
#include "feasregion/polyhedra.hpp"

namespace feasregion {

/// Which column of the nutrient matrix drives the cost vector: MaxProtein
/// minimizes the negated protein column, MinSodium minimizes sodium directly.
enum class DietObjective { MaxProtein, MinSodium };

/// Per-nutrient daily limits; a nutrient may carry either side or both.
struct NutrientBound {
  std::optional<double> lower;
  std::optional<double> upper;
};

/// A meal-planning instance: per-day servings observed for each food, the
/// per-serving nutrient contents, and the daily nutrient limits the planner
/// is known to respect. Every observation must satisfy every bound.
struct DietDataset {
  std::vector<std::string> foods;                        // n names
  std::vector<std::string> nutrients;                    // p names
  std::vector<std::vector<double>> observations;         // K x n servings
  std::vector<std::vector<double>> nutrient_matrix;      // n x p per serving
  std::vector<std::pair<std::string, NutrientBound>> nutrient_bounds;
  std::optional<double> max_total_servings;
  DietObjective objective_kind = DietObjective::MinSodium;
  /// One line per bound widened by load_dataset in auto-relax mode.
  std::vector<std::string> relax_log;

  int num_foods() const { return static_cast<int>(foods.size()); }
  int num_days() const { return static_cast<int>(observations.size()); }
  int nutrient_index(const std::string& name) const;  // -1 when absent

  /// Total per-nutrient intake of one day's servings.
  std::vector<double> nutrient_totals(int day) const;

  std::vector<double> cost_vector() const;

  /// The known constraint polyhedron: one row per declared bound side, the
  /// total-servings cap, then per-food nonnegativity. All rows untagged.
  Polyhedron known_constraints() const;
};

/// One line of the per-food comparison table.
struct DietFoodRow {
  std::string food;
  double without = 0.0;
  double with = 0.0;
};

/// Outcome of the inverse-optimization case study: the recommended diet with
/// only the declared bounds versus the diet after the unknown preference
/// constraints are inferred, and how close each sits to the observed days.
struct CaseStudyReport {
  std::vector<double> diet_without_mio;
  std::vector<double> diet_with_mio;
  double objective_without = 0.0;
  double objective_with = 0.0;
  double avg_l1_without = 0.0;
  double avg_l1_with = 0.0;
  std::vector<DietFoodRow> per_food;
  ImputedRegion imputation;  // inferred rows, loss, verification
};

/// Mean L1 distance from x to the observed points.
double avg_l1_distance(const std::vector<std::vector<double>>& points,
                       const std::vector<double>& x);

/// Reads a dataset from an observations CSV (header = food names, one row per
/// day), a nutrients CSV (first column = food name, remaining header cells =
/// nutrient names, one row per food), and a bounds JSON config (nutrient ->
/// {"lower": v} and/or {"upper": v}, plus optional "max_total_servings").
/// Every observation is checked against every bound: a violation throws an
/// Error naming the bound and the day, unless auto_relax is set, in which
/// case the bound is widened to the observed extreme and the change logged.
DietDataset load_dataset(const std::string& observations_csv,
                         const std::string& nutrients_csv,
                         const std::string& bounds_config,
                         bool auto_relax = false,
                         DietObjective objective = DietObjective::MinSodium);

/// Deterministically generates a dataset: per-food consumption frequencies
/// drawn from {20%, 40%, 60%, 80%, 100%} of days (scaled by `sparsity`), mean
/// serving sizes in [0.2, 5.0], nutrient contents in fixed per-nutrient
/// ranges, and bounds set to the observed envelope so the dataset always
/// passes load validation. Every day leaves at least one of the first three
/// foods unconsumed. When out_dir is nonempty, writes observations.csv,
/// nutrients.csv, and bounds.json there; the returned dataset equals what
/// load_dataset reads back. Identical seeds yield byte-identical files.
DietDataset generate_synthetic_dataset(std::uint64_t seed, int n, int K,
                                       double sparsity = 1.0,
                                       const std::string& out_dir = "");

/// Solves the forward diet twice -- once over the declared bounds alone, once
/// after imputing `m1` unknown rows under `loss` (default: fairness refined
/// by compactness) -- and reports both diets with their mean L1 distances to
/// the observed days.
CaseStudyReport run_case_study(const DietDataset& ds, int m1 = 30,
                               const std::optional<LossSpec>& loss = std::nullopt,
                               const ImputeOptions& options = {});

/// JSON rendering of the report (both diets, distances, per-food table, loss,
/// verification). Deterministic: fixed key order, exact doubles.
std::string render_case_study_report(const CaseStudyReport& report,
                                     const DietDataset& ds);

std::string to_string(DietObjective o);
DietObjective diet_objective_from_string(const std::string& s);

}  // namespace feasregion
