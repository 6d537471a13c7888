#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "feasregion/diet.hpp"
#include "feasregion/forward.hpp"
#include "feasregion/imputation.hpp"
#include "feasregion/json_io.hpp"
#include "feasregion/svg.hpp"
#include "json.hpp"

namespace {

using namespace feasregion;
using ordered_json = nlohmann::ordered_json;

constexpr int kExitOk = 0;
constexpr int kExitInput = 1;
constexpr int kExitSolver = 2;
constexpr int kExitVerification = 3;

int report_error(int code, const std::string& msg) {
  std::fprintf(stderr, "error: %s\n", msg.c_str());
  return code;
}

// FEASREGION_SOLVER_NODE_LIMIT overrides the branch-and-bound node cap.
SolverOptions solver_options_from_env() {
  SolverOptions options;
  if (const char* raw = std::getenv("FEASREGION_SOLVER_NODE_LIMIT")) {
    char* end = nullptr;
    const long value = std::strtol(raw, &end, 10);
    if (end == raw || *end != '\0' || value < 1)
      throw Error(std::string("FEASREGION_SOLVER_NODE_LIMIT must be a ") +
                  "positive integer, got \"" + raw + "\"");
    options.node_cap = value;
  }
  return options;
}

// A loss nameable on the command line; adherence and combined carry
// parameters and must come from the problem file's loss object.
LossSpec loss_by_name(const std::string& name) {
  if (name == "indifference") return LossSpec::indifference();
  if (name == "adjacency") return LossSpec::adjacency();
  if (name == "fairness") return LossSpec::fairness();
  if (name == "compactness") return LossSpec::compactness();
  throw Error("loss \"" + name +
              "\" is not nameable on the command line; expected one of "
              "indifference, adjacency, fairness, compactness (adherence and "
              "combined losses are configured in the problem file)");
}

LossSpec resolve_loss(const ProblemFile& pf, const std::string& loss_name,
                      const std::string& secondary_name) {
  LossSpec primary;
  if (loss_name.empty()) {
    primary = pf.loss ? *pf.loss : LossSpec::indifference();
  } else if (pf.loss &&
             ((loss_name == "adherence" &&
               pf.loss->kind == LossSpec::Kind::Adherence) ||
              (loss_name == "combined" &&
               pf.loss->kind == LossSpec::Kind::Combined))) {
    primary = *pf.loss;  // the flag confirms the file's parameterized loss
  } else {
    primary = loss_by_name(loss_name);
  }
  if (secondary_name.empty()) return primary;
  if (primary.kind == LossSpec::Kind::Combined)
    throw Error("--secondary cannot extend a combined loss");
  return LossSpec::combined({primary, loss_by_name(secondary_name)});
}

// The per-row prior must match the number of rows being imputed.
void check_prior_shape(const LossSpec& loss, int m1) {
  if (loss.kind == LossSpec::Kind::Adherence &&
      static_cast<int>(loss.prior.rows.size()) != m1)
    throw Error("adherence prior has " + std::to_string(loss.prior.rows.size()) +
                " rows but m1 is " + std::to_string(m1));
  for (const auto& stage : loss.sequence) check_prior_shape(stage, m1);
}

ordered_json verification_json(const VerificationReport& v) {
  ordered_json out;
  out["primal_feasible"] = v.primal_feasible;
  out["worst_violation"] = v.worst_violation;
  out["x0_optimal"] = v.x0_optimal;
  out["normalization_ok"] = v.normalization_ok;
  out["forward_optimum"] = v.forward_optimum;
  out["co_optimal_observations"] = v.co_optimal_observations;
  out["all_true"] = v.all_true();
  return out;
}

struct InferArgs {
  std::string problem_path;
  std::string loss_name;
  std::string secondary_name;
  int m1 = 0;  // 0 = keep the file's value
  std::string out_path;
  std::string plot_path;
};

int cmd_infer(const InferArgs& args) {
  ProblemFile pf;
  LossSpec loss;
  ImputeOptions options;
  try {
    options.solver = solver_options_from_env();
    pf = load_problem_file(args.problem_path);
    if (args.m1 > 0) pf.problem.m1 = args.m1;
    loss = resolve_loss(pf, args.loss_name, args.secondary_name);
    check_prior_shape(loss, pf.problem.m1);
    validate_problem(pf.problem);
    if (!args.plot_path.empty() && pf.problem.n != 2)
      throw Error("plotting requires n = 2, problem has n = " +
                  std::to_string(pf.problem.n));
  } catch (const Error& e) {
    return report_error(kExitInput, e.what());
  }

  ImputedRegion region;
  try {
    region = impute(pf.problem, loss, options);
  } catch (const BigMTooSmall& e) {
    ordered_json hint{{"suggested_big_m", e.suggested}};
    return report_error(kExitSolver,
                        std::string(e.what()) + " " + hint.dump());
  } catch (const Error& e) {
    return report_error(kExitSolver, e.what());
  }

  try {
    if (!args.out_path.empty()) save_region_file(args.out_path, region);
    else std::fputs(render_region_json(region).c_str(), stdout);
    if (!args.plot_path.empty())
      save_region_svg(args.plot_path, region, pf.problem.obs);
  } catch (const Error& e) {
    return report_error(kExitInput, e.what());
  }

  if (!region.verification.all_true()) {
    std::fprintf(stderr, "verification failed:\n%s\n",
                 verification_json(region.verification).dump(2).c_str());
    return kExitVerification;
  }
  return kExitOk;
}

int cmd_verify(const std::string& region_path, const std::string& problem_path) {
  ProblemFile pf;
  ImputedRegion region;
  SolverOptions options;
  try {
    options = solver_options_from_env();
    pf = load_problem_file(problem_path);
    region = load_region_file(region_path);
    if (region.known_set_S.n != pf.problem.n)
      throw Error("region has n = " + std::to_string(region.known_set_S.n) +
                  " but the problem has n = " + std::to_string(pf.problem.n));
  } catch (const Error& e) {
    return report_error(kExitInput, e.what());
  }

  VerificationReport report;
  const Polyhedron full = region.full_region();
  try {
    report = verify_imputation(full, pf.problem.obs, pf.problem.c, options);
  } catch (const Error& e) {
    return report_error(kExitSolver, e.what());
  }

  ordered_json out = verification_json(report);
  if (!report.primal_feasible) {
    ordered_json violations = ordered_json::array();
    for (const auto& v : is_valid_set(full, pf.problem.obs).violations)
      violations.push_back(ordered_json{{"row", v.row},
                                        {"observation", v.observation},
                                        {"amount", v.amount}});
    out["violations"] = std::move(violations);
  }
  std::printf("%s\n", out.dump(2).c_str());
  return report.all_true() ? kExitOk : kExitVerification;
}

int cmd_forward(const std::string& problem_path, const std::string& region_path) {
  ProblemFile pf;
  ImputedRegion region;
  SolverOptions options;
  try {
    options = solver_options_from_env();
    pf = load_problem_file(problem_path);
    region = load_region_file(region_path);
    if (region.known_set_S.n != pf.problem.n)
      throw Error("region has n = " + std::to_string(region.known_set_S.n) +
                  " but the problem has n = " + std::to_string(pf.problem.n));
  } catch (const Error& e) {
    return report_error(kExitInput, e.what());
  }

  SolverResult result;
  try {
    result = solve_forward({pf.problem.c, region.full_region()}, options);
  } catch (const Error& e) {
    return report_error(kExitSolver, e.what());
  }

  switch (result.status) {
    case SolveStatus::Optimal:
      std::printf("status: optimal\nvalue: %s\nx: %s\n",
                  ordered_json(result.objective_value).dump().c_str(),
                  ordered_json(result.solution).dump().c_str());
      return kExitOk;
    case SolveStatus::Infeasible:
      std::printf("status: infeasible\n");
      return kExitOk;  // a status, not an error
    case SolveStatus::Unbounded:
      std::printf("status: unbounded\n");
      return kExitOk;
    case SolveStatus::IterationLimit:
      break;
  }
  return report_error(kExitSolver, "solver hit its iteration limit");
}

struct DietArgs {
  std::string observations_path;
  std::string nutrients_path;
  std::string bounds_path;
  std::string objective_name = "min-sodium";
  int m1 = 30;
  std::string out_path;
  bool auto_relax = false;
  // Generation mode: write a synthetic dataset instead of running a study.
  bool generate = false;
  std::uint64_t seed = 42;
  int foods = 26;
  int days = 100;
  std::string out_dir;
};

void print_diet_table(const CaseStudyReport& report) {
  std::size_t width = 4;
  for (const auto& row : report.per_food) width = std::max(width, row.food.size());
  std::printf("%-*s %12s %12s\n", static_cast<int>(width), "food", "without",
              "with");
  for (const auto& row : report.per_food)
    std::printf("%-*s %12.3f %12.3f\n", static_cast<int>(width),
                row.food.c_str(), row.without, row.with);
  std::printf("%-*s %12.3f %12.3f\n", static_cast<int>(width), "objective",
              report.objective_without, report.objective_with);
  std::printf("%-*s %12.3f %12.3f\n", static_cast<int>(width),
              "avg L1 distance", report.avg_l1_without, report.avg_l1_with);
}

int cmd_diet(const DietArgs& args) {
  if (args.generate) {
    try {
      if (args.out_dir.empty())
        throw Error("--generate requires --out-dir");
      generate_synthetic_dataset(args.seed, args.foods, args.days, 1.0,
                                 args.out_dir);
    } catch (const Error& e) {
      return report_error(kExitInput, e.what());
    }
    std::printf(
        "wrote observations.csv, nutrients.csv, bounds.json to %s\n",
        args.out_dir.c_str());
    return kExitOk;
  }

  DietDataset ds;
  ImputeOptions options;
  try {
    options.solver = solver_options_from_env();
    if (args.observations_path.empty() || args.nutrients_path.empty() ||
        args.bounds_path.empty())
      throw Error("--observations, --nutrients, and --bounds are required");
    const DietObjective objective =
        diet_objective_from_string(args.objective_name);
    ds = load_dataset(args.observations_path, args.nutrients_path,
                      args.bounds_path, args.auto_relax, objective);
  } catch (const Error& e) {
    return report_error(kExitInput, e.what());
  }
  for (const auto& line : ds.relax_log) std::printf("%s\n", line.c_str());

  CaseStudyReport report;
  try {
    report = run_case_study(ds, args.m1, std::nullopt, options);
  } catch (const BigMTooSmall& e) {
    ordered_json hint{{"suggested_big_m", e.suggested}};
    return report_error(kExitSolver,
                        std::string(e.what()) + " " + hint.dump());
  } catch (const Error& e) {
    return report_error(kExitSolver, e.what());
  }

  try {
    if (!args.out_path.empty())
      write_text_file(args.out_path, render_case_study_report(report, ds));
  } catch (const Error& e) {
    return report_error(kExitInput, e.what());
  }

  print_diet_table(report);
  if (!report.imputation.verification.all_true()) {
    std::fprintf(stderr, "verification failed:\n%s\n",
                 verification_json(report.imputation.verification)
                     .dump(2)
                     .c_str());
    return kExitVerification;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"infers unknown linear constraints from feasible observations"};
  app.require_subcommand(1);

  InferArgs infer_args;
  auto* infer = app.add_subcommand(
      "infer", "impute unknown rows for a problem file and write the region");
  infer->add_option("--problem", infer_args.problem_path, "problem JSON file")
      ->required();
  infer->add_option("--loss", infer_args.loss_name,
                    "loss kind (overrides the file's loss)");
  infer->add_option("--secondary", infer_args.secondary_name,
                    "refine the primary loss by this one");
  infer->add_option("--m1", infer_args.m1, "number of unknown rows")
      ->check(CLI::PositiveNumber);
  infer->add_option("--out", infer_args.out_path,
                    "region JSON output path (default: stdout)");
  infer->add_option("--plot", infer_args.plot_path,
                    "SVG output path (n = 2 only)");

  std::string verify_region, verify_problem;
  auto* verify = app.add_subcommand(
      "verify", "re-check a region file against its problem");
  verify->add_option("--region", verify_region, "region JSON file")->required();
  verify->add_option("--problem", verify_problem, "problem JSON file")
      ->required();

  std::string forward_problem, forward_region;
  auto* forward = app.add_subcommand(
      "forward", "minimize the problem's cost over a region file");
  forward->add_option("--problem", forward_problem, "problem JSON file")
      ->required();
  forward->add_option("--region", forward_region, "region JSON file")
      ->required();

  DietArgs diet_args;
  auto* diet = app.add_subcommand(
      "diet", "run the meal-planning case study on a dataset");
  diet->add_option("--observations", diet_args.observations_path,
                   "per-day servings CSV");
  diet->add_option("--nutrients", diet_args.nutrients_path,
                   "per-serving nutrient contents CSV");
  diet->add_option("--bounds", diet_args.bounds_path, "bounds JSON config");
  diet->add_option("--objective", diet_args.objective_name,
                   "max-protein or min-sodium");
  diet->add_option("--m1", diet_args.m1, "number of unknown rows")
      ->check(CLI::PositiveNumber);
  diet->add_option("--out", diet_args.out_path, "report JSON output path");
  diet->add_flag("--auto-relax", diet_args.auto_relax,
                 "widen violated bounds to the observed extreme");
  diet->add_flag("--generate", diet_args.generate,
                 "write a synthetic dataset instead of running a study");
  diet->add_option("--seed", diet_args.seed, "generation seed");
  diet->add_option("--foods", diet_args.foods, "generated food count")
      ->check(CLI::PositiveNumber);
  diet->add_option("--days", diet_args.days, "generated day count")
      ->check(CLI::PositiveNumber);
  diet->add_option("--out-dir", diet_args.out_dir,
                   "directory for the generated CSV/JSON files");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInput;
  }

  if (infer->parsed()) return cmd_infer(infer_args);
  if (verify->parsed()) return cmd_verify(verify_region, verify_problem);
  if (forward->parsed()) return cmd_forward(forward_problem, forward_region);
  if (diet->parsed()) return cmd_diet(diet_args);
  return kExitInput;
}
