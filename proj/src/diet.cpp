#include "feasregion/diet.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "feasregion/forward.hpp"
#include "json.hpp"

namespace feasregion {
namespace {

using ordered_json = nlohmann::ordered_json;

// Canonical synthetic nutrient catalogue: name, per-serving content range,
// and which side of the daily total is bounded.
struct NutrientProfile {
  const char* name;
  double content_lo, content_hi;
  bool bound_lower, bound_upper;
};

constexpr NutrientProfile kNutrients[] = {
    {"carbohydrates", 0.0, 50.0, true, false},
    {"fiber", 0.0, 8.0, true, false},
    {"calories", 50.0, 400.0, true, true},
    {"fat", 0.0, 20.0, false, true},
    {"sugar", 0.0, 25.0, false, true},
    {"cholesterol", 0.0, 100.0, false, true},
    {"protein", 1.0, 25.0, false, false},
    {"sodium", 10.0, 800.0, false, false},
};

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

std::vector<std::vector<std::string>> read_csv(const std::string& path,
                                               const std::string& label) {
  std::ifstream in(path);
  if (!in) throw Error("diet: cannot open " + label + " '" + path + "'");
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    rows.push_back(split_csv_line(line));
  }
  if (rows.empty()) throw Error("diet: " + label + " '" + path + "' is empty");
  return rows;
}

double parse_number(const std::string& cell, const std::string& where) {
  const std::string t = trim(cell);
  const char* begin = t.c_str();
  char* end = nullptr;
  double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0' || !std::isfinite(v))
    throw Error("diet: " + where + ": not a number: '" + cell + "'");
  return v;
}

// Snaps a value to the double that its three-decimal CSV rendering parses
// back to, so the generated dataset and its files agree bit for bit.
double canon3(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return std::strtod(buf, nullptr);
}

std::string fmt3(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

std::vector<double> nutrient_column(const DietDataset& ds, int j) {
  std::vector<double> col(ds.foods.size());
  for (size_t i = 0; i < ds.foods.size(); ++i) col[i] = ds.nutrient_matrix[i][j];
  return col;
}

NutrientBound* find_bound(DietDataset& ds, const std::string& name) {
  for (auto& [n, b] : ds.nutrient_bounds)
    if (n == name) return &b;
  return nullptr;
}

// Checks every declared bound against every day's totals. Strict mode throws
// on the first violation (bounds in declaration order, days ascending);
// auto-relax widens the bound to the observed extreme and logs the change
// with the day that forced it.
void validate_bounds(DietDataset& ds, bool auto_relax) {
  const int K = ds.num_days();
  std::vector<std::vector<double>> totals(K);
  for (int d = 0; d < K; ++d) totals[d] = ds.nutrient_totals(d);

  for (auto& [name, bound] : ds.nutrient_bounds) {
    const int j = ds.nutrient_index(name);
    if (bound.lower) {
      int worst = -1;
      for (int d = 0; d < K; ++d) {
        if (totals[d][j] < *bound.lower - 1e-9) {
          if (!auto_relax)
            throw Error("diet: day " + std::to_string(d + 1) +
                        " violates the lower bound on " + name + " (" +
                        std::to_string(totals[d][j]) + " < " +
                        std::to_string(*bound.lower) + ")");
          if (worst < 0 || totals[d][j] < totals[worst][j]) worst = d;
        }
      }
      if (worst >= 0) {
        ds.relax_log.push_back("relaxed lower bound on " + name + ": " +
                               std::to_string(*bound.lower) + " -> " +
                               std::to_string(totals[worst][j]) + " (day " +
                               std::to_string(worst + 1) + ")");
        bound.lower = totals[worst][j];
      }
    }
    if (bound.upper) {
      int worst = -1;
      for (int d = 0; d < K; ++d) {
        if (totals[d][j] > *bound.upper + 1e-9) {
          if (!auto_relax)
            throw Error("diet: day " + std::to_string(d + 1) +
                        " violates the upper bound on " + name + " (" +
                        std::to_string(totals[d][j]) + " > " +
                        std::to_string(*bound.upper) + ")");
          if (worst < 0 || totals[d][j] > totals[worst][j]) worst = d;
        }
      }
      if (worst >= 0) {
        ds.relax_log.push_back("relaxed upper bound on " + name + ": " +
                               std::to_string(*bound.upper) + " -> " +
                               std::to_string(totals[worst][j]) + " (day " +
                               std::to_string(worst + 1) + ")");
        bound.upper = totals[worst][j];
      }
    }
  }

  if (ds.max_total_servings) {
    int worst = -1;
    double worst_total = 0.0;
    for (int d = 0; d < K; ++d) {
      double total = 0.0;
      for (double v : ds.observations[d]) total += v;
      if (total > *ds.max_total_servings + 1e-9 &&
          (worst < 0 || total > worst_total)) {
        if (!auto_relax)
          throw Error("diet: day " + std::to_string(d + 1) +
                      " violates max_total_servings (" + std::to_string(total) +
                      " > " + std::to_string(*ds.max_total_servings) + ")");
        worst = d;
        worst_total = total;
      }
    }
    if (worst >= 0) {
      ds.relax_log.push_back("relaxed max_total_servings: " +
                             std::to_string(*ds.max_total_servings) + " -> " +
                             std::to_string(worst_total) + " (day " +
                             std::to_string(worst + 1) + ")");
      ds.max_total_servings = worst_total;
    }
  }
}

ordered_json verification_json(const VerificationReport& v) {
  ordered_json out;
  out["primal_feasible"] = v.primal_feasible;
  out["x0_optimal"] = v.x0_optimal;
  out["normalization_ok"] = v.normalization_ok;
  out["all_true"] = v.all_true();
  out["worst_violation"] = v.worst_violation;
  out["forward_optimum"] = v.forward_optimum;
  out["co_optimal_observations"] = v.co_optimal_observations;
  return out;
}

}  // namespace

int DietDataset::nutrient_index(const std::string& name) const {
  for (size_t j = 0; j < nutrients.size(); ++j)
    if (nutrients[j] == name) return static_cast<int>(j);
  return -1;
}

std::vector<double> DietDataset::nutrient_totals(int day) const {
  std::vector<double> t(nutrients.size(), 0.0);
  for (size_t i = 0; i < foods.size(); ++i)
    for (size_t j = 0; j < nutrients.size(); ++j)
      t[j] += observations[day][i] * nutrient_matrix[i][j];
  return t;
}

std::vector<double> DietDataset::cost_vector() const {
  const char* needed =
      objective_kind == DietObjective::MaxProtein ? "protein" : "sodium";
  const int j = nutrient_index(needed);
  if (j < 0)
    throw Error(std::string("diet: objective ") + to_string(objective_kind) +
                " needs the nutrient '" + needed + "', which the dataset lacks");
  std::vector<double> c = nutrient_column(*this, j);
  if (objective_kind == DietObjective::MaxProtein)
    for (double& v : c) v = -v;
  return c;
}

Polyhedron DietDataset::known_constraints() const {
  Polyhedron P;
  P.n = num_foods();
  for (const auto& [name, bound] : nutrient_bounds) {
    const int j = nutrient_index(name);
    if (j < 0) throw Error("diet: bound on unknown nutrient '" + name + "'");
    const std::vector<double> col = nutrient_column(*this, j);
    if (bound.lower) P.add_row(col, *bound.lower);
    if (bound.upper) {
      std::vector<double> neg(col);
      for (double& v : neg) v = -v;
      P.add_row(neg, -*bound.upper);
    }
  }
  if (max_total_servings)
    P.add_row(std::vector<double>(foods.size(), -1.0), -*max_total_servings);
  for (int i = 0; i < num_foods(); ++i) {
    std::vector<double> e(foods.size(), 0.0);
    e[i] = 1.0;
    P.add_row(std::move(e), 0.0);
  }
  return P;
}

double avg_l1_distance(const std::vector<std::vector<double>>& points,
                       const std::vector<double>& x) {
  if (points.empty()) throw Error("diet: no points to measure distance to");
  double total = 0.0;
  for (const auto& p : points) {
    if (p.size() != x.size())
      throw DimensionError("diet: point dimension mismatch in avg_l1_distance");
    for (size_t j = 0; j < x.size(); ++j) total += std::abs(p[j] - x[j]);
  }
  return total / static_cast<double>(points.size());
}

DietDataset load_dataset(const std::string& observations_csv,
                         const std::string& nutrients_csv,
                         const std::string& bounds_config, bool auto_relax,
                         DietObjective objective) {
  DietDataset ds;
  ds.objective_kind = objective;

  const auto obs_rows = read_csv(observations_csv, "observations CSV");
  ds.foods = obs_rows[0];
  if (ds.foods.size() < 2)
    throw Error("diet: observations CSV needs at least two food columns");
  for (size_t i = 0; i < ds.foods.size(); ++i) {
    if (ds.foods[i].empty())
      throw Error("diet: observations CSV header column " +
                  std::to_string(i + 1) + " is empty");
    for (size_t k = 0; k < i; ++k)
      if (ds.foods[k] == ds.foods[i])
        throw Error("diet: duplicate food '" + ds.foods[i] +
                    "' in observations CSV header");
  }
  if (obs_rows.size() < 2)
    throw Error("diet: observations CSV has no data rows");
  for (size_t r = 1; r < obs_rows.size(); ++r) {
    if (obs_rows[r].size() != ds.foods.size())
      throw Error("diet: observations CSV line " + std::to_string(r + 1) +
                  ": expected " + std::to_string(ds.foods.size()) +
                  " fields, got " + std::to_string(obs_rows[r].size()));
    std::vector<double> day(ds.foods.size());
    for (size_t i = 0; i < ds.foods.size(); ++i) {
      day[i] = parse_number(obs_rows[r][i], "observations CSV line " +
                                                std::to_string(r + 1) +
                                                ", column '" + ds.foods[i] + "'");
      if (day[i] < 0.0)
        throw Error("diet: day " + std::to_string(r) +
                    " has negative servings of " + ds.foods[i] + " (" +
                    obs_rows[r][i] + ")");
    }
    ds.observations.push_back(std::move(day));
  }

  const auto nut_rows = read_csv(nutrients_csv, "nutrients CSV");
  if (nut_rows[0].size() < 2)
    throw Error("diet: nutrients CSV needs a food column and at least one nutrient");
  ds.nutrients.assign(nut_rows[0].begin() + 1, nut_rows[0].end());
  for (size_t j = 0; j < ds.nutrients.size(); ++j) {
    if (ds.nutrients[j].empty())
      throw Error("diet: nutrients CSV header column " +
                  std::to_string(j + 2) + " is empty");
    for (size_t k = 0; k < j; ++k)
      if (ds.nutrients[k] == ds.nutrients[j])
        throw Error("diet: duplicate nutrient '" + ds.nutrients[j] +
                    "' in nutrients CSV header");
  }
  if (nut_rows.size() - 1 != ds.foods.size())
    throw Error("diet: nutrients CSV has " + std::to_string(nut_rows.size() - 1) +
                " food rows but the observations CSV names " +
                std::to_string(ds.foods.size()) + " foods");
  ds.nutrient_matrix.resize(ds.foods.size());
  for (size_t r = 1; r < nut_rows.size(); ++r) {
    if (nut_rows[r].size() != ds.nutrients.size() + 1)
      throw Error("diet: nutrients CSV line " + std::to_string(r + 1) +
                  ": expected " + std::to_string(ds.nutrients.size() + 1) +
                  " fields, got " + std::to_string(nut_rows[r].size()));
    if (nut_rows[r][0] != ds.foods[r - 1])
      throw Error("diet: nutrients CSV row " + std::to_string(r + 1) +
                  " names food '" + nut_rows[r][0] +
                  "' where the observations CSV has '" + ds.foods[r - 1] + "'");
    std::vector<double> contents(ds.nutrients.size());
    for (size_t j = 0; j < ds.nutrients.size(); ++j) {
      contents[j] = parse_number(
          nut_rows[r][j + 1], "nutrients CSV line " + std::to_string(r + 1) +
                                  ", column '" + ds.nutrients[j] + "'");
      if (contents[j] < 0.0)
        throw Error("diet: negative " + ds.nutrients[j] + " content for " +
                    ds.foods[r - 1]);
    }
    ds.nutrient_matrix[r - 1] = std::move(contents);
  }

  std::ifstream bin(bounds_config);
  if (!bin) throw Error("diet: cannot open bounds config '" + bounds_config + "'");
  ordered_json bounds;
  try {
    bounds = ordered_json::parse(bin);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(std::string("diet: bounds config: ") + e.what());
  }
  if (!bounds.is_object())
    throw Error("diet: bounds config must be a JSON object");
  for (const auto& [key, value] : bounds.items()) {
    if (key == "max_total_servings") {
      if (!value.is_number())
        throw Error("diet: bounds config: max_total_servings must be a number");
      ds.max_total_servings = value.get<double>();
      if (*ds.max_total_servings <= 0.0)
        throw Error("diet: bounds config: max_total_servings must be positive");
      continue;
    }
    if (ds.nutrient_index(key) < 0)
      throw Error("diet: bounds config: unknown nutrient '" + key + "'");
    if (!value.is_object())
      throw Error("diet: bounds config: " + key + " must map to an object");
    NutrientBound nb;
    for (const auto& [side, num] : value.items()) {
      if (side != "lower" && side != "upper")
        throw Error("diet: bounds config: " + key + ": unknown key '" + side + "'");
      if (!num.is_number())
        throw Error("diet: bounds config: " + key + "." + side + " must be a number");
      (side == "lower" ? nb.lower : nb.upper) = num.get<double>();
    }
    if (!nb.lower && !nb.upper)
      throw Error("diet: bounds config: " + key + " declares no bound");
    if (nb.lower && nb.upper && *nb.lower > *nb.upper)
      throw Error("diet: bounds config: " + key + " has lower > upper");
    if (find_bound(ds, key))
      throw Error("diet: bounds config: duplicate nutrient '" + key + "'");
    ds.nutrient_bounds.emplace_back(key, nb);
  }

  validate_bounds(ds, auto_relax);
  return ds;
}

DietDataset generate_synthetic_dataset(std::uint64_t seed, int n, int K,
                                       double sparsity,
                                       const std::string& out_dir) {
  if (n < 2) throw Error("diet: generator needs at least two foods");
  if (K < 1) throw Error("diet: generator needs at least one day");
  if (!(sparsity > 0.0))
    throw Error("diet: generator sparsity must be positive");

  std::mt19937_64 eng(seed);
  auto u01 = [&] { return static_cast<double>(eng() >> 11) * 0x1p-53; };
  auto pick = [&](int m) {
    return std::min(m - 1, static_cast<int>(u01() * static_cast<double>(m)));
  };

  DietDataset ds;
  const int width = std::max(2, static_cast<int>(std::to_string(n).size()));
  for (int i = 0; i < n; ++i) {
    std::string id = std::to_string(i + 1);
    ds.foods.push_back("food_" + std::string(width - id.size(), '0') + id);
  }
  for (const auto& np : kNutrients) ds.nutrients.push_back(np.name);

  std::vector<double> frac(n), mean(n);
  for (int i = 0; i < n; ++i) {
    frac[i] = 0.2 * static_cast<double>(1 + pick(5));
    mean[i] = 0.2 + 4.8 * u01();
  }

  ds.nutrient_matrix.resize(n);
  for (int i = 0; i < n; ++i) {
    ds.nutrient_matrix[i].resize(ds.nutrients.size());
    for (size_t j = 0; j < ds.nutrients.size(); ++j) {
      const auto& np = kNutrients[j];
      ds.nutrient_matrix[i][j] = canon3(np.content_lo +
                                        (np.content_hi - np.content_lo) * u01());
    }
  }

  ds.observations.assign(K, std::vector<double>(n, 0.0));
  std::vector<int> perm(K);
  for (int i = 0; i < n; ++i) {
    const int count = std::clamp(
        static_cast<int>(std::lround(K * frac[i] * sparsity)), 1, K);
    for (int d = 0; d < K; ++d) perm[d] = d;
    for (int t = K - 1; t >= 1; --t) std::swap(perm[t], perm[pick(t + 1)]);
    for (int d = 0; d < count; ++d)
      ds.observations[perm[d]][i] = canon3(mean[i] * (0.5 + u01()));
  }
  // Every day skips one of the first few foods, in rotation. This keeps a
  // supporting axis row through each observation, which the compactness
  // stage's certificate needs at the case-study scale.
  const int rotation = std::min(3, n);
  for (int d = 0; d < K; ++d) ds.observations[d][d % rotation] = 0.0;

  // Bounds are the observed envelope, so the dataset validates by
  // construction and every day remains feasible for the known rows.
  std::vector<std::vector<double>> totals(K);
  for (int d = 0; d < K; ++d) {
    totals[d].assign(ds.nutrients.size(), 0.0);
    for (int i = 0; i < n; ++i)
      for (size_t j = 0; j < ds.nutrients.size(); ++j)
        totals[d][j] += ds.observations[d][i] * ds.nutrient_matrix[i][j];
  }
  for (size_t j = 0; j < ds.nutrients.size(); ++j) {
    const auto& np = kNutrients[j];
    if (!np.bound_lower && !np.bound_upper) continue;
    NutrientBound nb;
    double lo = totals[0][j], hi = totals[0][j];
    for (int d = 1; d < K; ++d) {
      lo = std::min(lo, totals[d][j]);
      hi = std::max(hi, totals[d][j]);
    }
    if (np.bound_lower) nb.lower = lo;
    if (np.bound_upper) nb.upper = hi;
    ds.nutrient_bounds.emplace_back(np.name, nb);
  }
  double max_servings = 0.0;
  for (int d = 0; d < K; ++d) {
    double total = 0.0;
    for (double v : ds.observations[d]) total += v;
    max_servings = std::max(max_servings, total);
  }
  ds.max_total_servings = max_servings;

  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    const auto path = [&](const char* name) {
      return (std::filesystem::path(out_dir) / name).string();
    };

    std::ofstream obs_out(path("observations.csv"));
    for (int i = 0; i < n; ++i) obs_out << (i ? "," : "") << ds.foods[i];
    obs_out << '\n';
    for (int d = 0; d < K; ++d) {
      for (int i = 0; i < n; ++i)
        obs_out << (i ? "," : "") << fmt3(ds.observations[d][i]);
      obs_out << '\n';
    }

    std::ofstream nut_out(path("nutrients.csv"));
    nut_out << "food";
    for (const auto& name : ds.nutrients) nut_out << ',' << name;
    nut_out << '\n';
    for (int i = 0; i < n; ++i) {
      nut_out << ds.foods[i];
      for (size_t j = 0; j < ds.nutrients.size(); ++j)
        nut_out << ',' << fmt3(ds.nutrient_matrix[i][j]);
      nut_out << '\n';
    }

    ordered_json bounds;
    for (const auto& [name, nb] : ds.nutrient_bounds) {
      ordered_json entry;
      if (nb.lower) entry["lower"] = *nb.lower;
      if (nb.upper) entry["upper"] = *nb.upper;
      bounds[name] = entry;
    }
    bounds["max_total_servings"] = *ds.max_total_servings;
    std::ofstream bounds_out(path("bounds.json"));
    bounds_out << bounds.dump(2) << '\n';
  }
  return ds;
}

CaseStudyReport run_case_study(const DietDataset& ds, int m1,
                               const std::optional<LossSpec>& loss,
                               const ImputeOptions& options) {
  if (ds.num_foods() < 2) throw Error("diet: need at least two foods");
  if (ds.num_days() < 1) throw Error("diet: need at least one observed day");

  const std::vector<double> c = ds.cost_vector();
  const Polyhedron known = ds.known_constraints();

  ProblemInstance p;
  p.n = ds.num_foods();
  p.c = c;
  p.obs = make_observation_set(ds.observations, c);
  p.known = known;
  p.m1 = m1;

  const LossSpec spec =
      loss ? *loss
           : LossSpec::combined({LossSpec::fairness(), LossSpec::compactness()});

  CaseStudyReport rep;
  const SolverResult fw0 = solve_forward({c, known}, options.solver);
  if (fw0.status != SolveStatus::Optimal)
    throw Error("diet: the declared bounds alone give a " +
                to_string(fw0.status) + " forward problem");

  rep.imputation = impute(p, spec, options);
  const SolverResult fw1 =
      solve_forward({c, rep.imputation.full_region()}, options.solver);
  if (fw1.status != SolveStatus::Optimal)
    throw Error("diet: forward solve over the imputed region came back " +
                to_string(fw1.status));

  rep.diet_without_mio = fw0.solution;
  rep.objective_without = fw0.objective_value;
  rep.diet_with_mio = fw1.solution;
  rep.objective_with = fw1.objective_value;
  rep.avg_l1_without = avg_l1_distance(ds.observations, fw0.solution);
  rep.avg_l1_with = avg_l1_distance(ds.observations, fw1.solution);
  for (int i = 0; i < ds.num_foods(); ++i)
    rep.per_food.push_back(
        {ds.foods[i], rep.diet_without_mio[i], rep.diet_with_mio[i]});
  return rep;
}

std::string render_case_study_report(const CaseStudyReport& report,
                                     const DietDataset& ds) {
  ordered_json out;
  out["objective"] = to_string(ds.objective_kind);
  out["foods"] = ds.foods;
  out["diet_without_mio"] = report.diet_without_mio;
  out["diet_with_mio"] = report.diet_with_mio;
  out["objective_without"] = report.objective_without;
  out["objective_with"] = report.objective_with;
  out["avg_l1_without"] = report.avg_l1_without;
  out["avg_l1_with"] = report.avg_l1_with;
  ordered_json table = ordered_json::array();
  for (const auto& row : report.per_food) {
    ordered_json entry;
    entry["food"] = row.food;
    entry["without"] = row.without;
    entry["with"] = row.with;
    table.push_back(entry);
  }
  out["per_food"] = table;
  out["loss_value"] = report.imputation.loss_value;
  out["stage_losses"] = report.imputation.stage_losses;
  if (!ds.relax_log.empty()) out["relaxations"] = ds.relax_log;
  out["verification"] = verification_json(report.imputation.verification);
  return out.dump(2) + "\n";
}

std::string to_string(DietObjective o) {
  return o == DietObjective::MaxProtein ? "max-protein" : "min-sodium";
}

DietObjective diet_objective_from_string(const std::string& s) {
  if (s == "max-protein") return DietObjective::MaxProtein;
  if (s == "min-sodium") return DietObjective::MinSodium;
  throw Error("diet: unknown objective '" + s +
              "' (expected max-protein or min-sodium)");
}

}  // namespace feasregion
