#include "feasregion/json_io.hpp"

#include <cmath>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

namespace feasregion {
namespace {

using ordered_json = nlohmann::ordered_json;

[[noreturn]] void fail(const std::string& ctx, const std::string& msg) {
  throw Error(ctx + ": " + msg);
}

std::string quoted(const std::string& key) { return "\"" + key + "\""; }

const ordered_json& object_at(const ordered_json& v, const std::string& ctx) {
  if (!v.is_object()) fail(ctx, "expected an object");
  return v;
}

// Strict schema: every present key must be on the allowed list.
void reject_unknown_keys(const ordered_json& obj, const std::string& ctx,
                         std::initializer_list<const char*> allowed) {
  for (const auto& item : obj.items()) {
    bool known = false;
    for (const char* k : allowed) {
      if (item.key() == k) {
        known = true;
        break;
      }
    }
    if (!known) fail(ctx, "unknown key " + quoted(item.key()));
  }
}

const ordered_json& required(const ordered_json& obj, const std::string& ctx,
                             const char* key) {
  auto it = obj.find(key);
  if (it == obj.end()) fail(ctx, "missing required key " + quoted(key));
  return *it;
}

double number_value(const ordered_json& v, const std::string& ctx,
                    const std::string& what) {
  if (!v.is_number()) fail(ctx, what + " must be a number");
  return v.get<double>();
}

long long integer_value(const ordered_json& v, const std::string& ctx,
                        const std::string& what) {
  if (!v.is_number_integer()) fail(ctx, what + " must be an integer");
  return v.get<long long>();
}

std::string string_value(const ordered_json& v, const std::string& ctx,
                         const std::string& what) {
  if (!v.is_string()) fail(ctx, what + " must be a string");
  return v.get<std::string>();
}

bool bool_value(const ordered_json& v, const std::string& ctx,
                const std::string& what) {
  if (!v.is_boolean()) fail(ctx, what + " must be a boolean");
  return v.get<bool>();
}

std::vector<double> number_array(const ordered_json& v, const std::string& ctx,
                                 const std::string& what) {
  if (!v.is_array()) fail(ctx, what + " must be an array of numbers");
  std::vector<double> out;
  out.reserve(v.size());
  for (const auto& e : v) out.push_back(number_value(e, ctx, "entry of " + what));
  return out;
}

std::vector<std::vector<double>> number_matrix(const ordered_json& v,
                                               const std::string& ctx,
                                               const std::string& what) {
  if (!v.is_array()) fail(ctx, what + " must be an array of rows");
  std::vector<std::vector<double>> out;
  out.reserve(v.size());
  for (std::size_t i = 0; i < v.size(); ++i)
    out.push_back(number_array(v[i], ctx, what + " row " + std::to_string(i)));
  return out;
}

void check_row_width(const std::vector<std::vector<double>>& m, int n,
                     const std::string& ctx, const std::string& what) {
  for (std::size_t i = 0; i < m.size(); ++i)
    if (static_cast<int>(m[i].size()) != n)
      fail(ctx, what + " row " + std::to_string(i) + " has " +
                    std::to_string(m[i].size()) + " entries, expected " +
                    std::to_string(n));
}

ordered_json parse_document(const std::string& text, const std::string& ctx) {
  try {
    return ordered_json::parse(text);
  } catch (const ordered_json::parse_error& e) {
    // e.what() carries nlohmann's "parse error at line L, column C" text.
    fail(ctx, e.what());
  }
}

double finite_or_fail(double v, const std::string& ctx, const std::string& what) {
  if (!std::isfinite(v)) fail(ctx, what + " is not finite");
  return v;
}

// --- normalization tags ------------------------------------------------

const char* tag_kind_name(RowTagKind kind) {
  switch (kind) {
    case RowTagKind::SumProxy: return "sum-proxy";
    case RowTagKind::L1Exact: return "l1-exact";
    case RowTagKind::None: return "none";
  }
  return "none";
}

RowTagKind tag_kind_from_name(const std::string& name, const std::string& ctx) {
  if (name == "sum-proxy") return RowTagKind::SumProxy;
  if (name == "l1-exact") return RowTagKind::L1Exact;
  if (name == "none") return RowTagKind::None;
  fail(ctx, "unknown tag kind " + quoted(name));
}

ordered_json tag_to_json(const NormalizationTag& tag) {
  return ordered_json{{"kind", tag_kind_name(tag.kind)}, {"sigma", tag.sigma}};
}

NormalizationTag tag_from_json(const ordered_json& v, const std::string& ctx) {
  const auto& obj = object_at(v, ctx);
  reject_unknown_keys(obj, ctx, {"kind", "sigma"});
  NormalizationTag tag;
  tag.kind = tag_kind_from_name(
      string_value(required(obj, ctx, "kind"), ctx, quoted("kind")), ctx);
  tag.sigma = static_cast<int>(
      integer_value(required(obj, ctx, "sigma"), ctx, quoted("sigma")));
  return tag;
}

ordered_json constraint_row_to_json(const ConstraintRow& row) {
  return ordered_json{
      {"a", row.a}, {"b", row.b}, {"tag", tag_to_json(row.tag)}};
}

ConstraintRow constraint_row_from_json(const ordered_json& v, int n,
                                       const std::string& ctx) {
  const auto& obj = object_at(v, ctx);
  reject_unknown_keys(obj, ctx, {"a", "b", "tag"});
  ConstraintRow row;
  row.a = number_array(required(obj, ctx, "a"), ctx, quoted("a"));
  if (static_cast<int>(row.a.size()) != n)
    fail(ctx, quoted("a") + " has " + std::to_string(row.a.size()) +
                  " entries, expected " + std::to_string(n));
  row.b = number_value(required(obj, ctx, "b"), ctx, quoted("b"));
  row.tag = tag_from_json(required(obj, ctx, "tag"), ctx + " tag");
  return row;
}

// --- loss objects -------------------------------------------------------

const char* loss_kind_name(LossSpec::Kind kind) {
  switch (kind) {
    case LossSpec::Kind::Adherence: return "adherence";
    case LossSpec::Kind::Indifference: return "indifference";
    case LossSpec::Kind::Adjacency: return "adjacency";
    case LossSpec::Kind::Fairness: return "fairness";
    case LossSpec::Kind::Compactness: return "compactness";
    case LossSpec::Kind::Combined: return "combined";
  }
  return "indifference";
}

LossSpec::Kind loss_kind_from_name(const std::string& name,
                                   const std::string& ctx) {
  if (name == "adherence") return LossSpec::Kind::Adherence;
  if (name == "indifference") return LossSpec::Kind::Indifference;
  if (name == "adjacency") return LossSpec::Kind::Adjacency;
  if (name == "fairness") return LossSpec::Kind::Fairness;
  if (name == "compactness") return LossSpec::Kind::Compactness;
  if (name == "combined") return LossSpec::Kind::Combined;
  fail(ctx, "unknown loss kind " + quoted(name));
}

ordered_json loss_to_json(const LossSpec& loss) {
  ordered_json out;
  out["kind"] = loss_kind_name(loss.kind);
  switch (loss.kind) {
    case LossSpec::Kind::Adherence: {
      ordered_json prior;
      ordered_json A = ordered_json::array();
      ordered_json b = ordered_json::array();
      for (const auto& row : loss.prior.rows) {
        A.push_back(row.a);
        b.push_back(row.b);
      }
      prior["A"] = std::move(A);
      prior["b"] = std::move(b);
      out["prior"] = std::move(prior);
      if (!loss.weights.empty()) out["weights"] = loss.weights;
      out["distance"] = loss.distance == DistanceNorm::L2 ? "l2" : "l1";
      break;
    }
    case LossSpec::Kind::Compactness:
      if (loss.big_m) out["big_m"] = *loss.big_m;
      break;
    case LossSpec::Kind::Combined: {
      ordered_json seq = ordered_json::array();
      for (const auto& stage : loss.sequence) seq.push_back(loss_to_json(stage));
      out["sequence"] = std::move(seq);
      out["epsilon"] = loss.epsilon;
      break;
    }
    default:
      break;
  }
  return out;
}

LossSpec loss_from_json(const ordered_json& v, int n,
                        NormalizationScheme scheme, const std::string& ctx,
                        bool allow_combined) {
  const auto& obj = object_at(v, ctx);
  const std::string kind_name =
      string_value(required(obj, ctx, "kind"), ctx, quoted("kind"));
  const LossSpec::Kind kind = loss_kind_from_name(kind_name, ctx);

  switch (kind) {
    case LossSpec::Kind::Adherence: {
      reject_unknown_keys(obj, ctx, {"kind", "prior", "weights", "distance"});
      const std::string pctx = ctx + " prior";
      const auto& prior_obj = object_at(required(obj, ctx, "prior"), pctx);
      reject_unknown_keys(prior_obj, pctx, {"A", "b"});
      auto A = number_matrix(required(prior_obj, pctx, "A"), pctx, quoted("A"));
      auto b = number_array(required(prior_obj, pctx, "b"), pctx, quoted("b"));
      if (A.size() != b.size())
        fail(pctx, quoted("A") + " has " + std::to_string(A.size()) +
                       " rows but " + quoted("b") + " has " +
                       std::to_string(b.size()) + " entries");
      check_row_width(A, n, pctx, quoted("A"));
      Polyhedron prior;
      prior.n = n;
      for (std::size_t i = 0; i < A.size(); ++i) {
        try {
          prior.rows.push_back(
              normalize_row({A[i], b[i], NormalizationTag::none()}, scheme));
        } catch (const Error& e) {
          fail(pctx + " row " + std::to_string(i), e.what());
        }
      }
      std::vector<double> weights;
      if (auto it = obj.find("weights"); it != obj.end()) {
        weights = number_array(*it, ctx, quoted("weights"));
        if (weights.size() != A.size())
          fail(ctx, quoted("weights") + " has " +
                        std::to_string(weights.size()) + " entries but the " +
                        "prior has " + std::to_string(A.size()) + " rows");
      }
      DistanceNorm distance = DistanceNorm::L1;
      if (auto it = obj.find("distance"); it != obj.end()) {
        const std::string name = string_value(*it, ctx, quoted("distance"));
        if (name == "l1") distance = DistanceNorm::L1;
        else if (name == "l2") distance = DistanceNorm::L2;
        else fail(ctx, "unknown distance " + quoted(name));
      }
      return LossSpec::adherence(std::move(prior), std::move(weights), distance);
    }
    case LossSpec::Kind::Compactness: {
      reject_unknown_keys(obj, ctx, {"kind", "big_m"});
      std::optional<double> big_m;
      if (auto it = obj.find("big_m"); it != obj.end()) {
        big_m = number_value(*it, ctx, quoted("big_m"));
        if (!(*big_m > 0.0)) fail(ctx, quoted("big_m") + " must be positive");
      }
      return LossSpec::compactness(big_m);
    }
    case LossSpec::Kind::Combined: {
      if (!allow_combined)
        fail(ctx, "combined losses cannot nest inside a sequence");
      reject_unknown_keys(obj, ctx, {"kind", "sequence", "epsilon"});
      const auto& seq = required(obj, ctx, "sequence");
      if (!seq.is_array() || seq.empty())
        fail(ctx, quoted("sequence") + " must be a non-empty array");
      std::vector<LossSpec> stages;
      for (std::size_t i = 0; i < seq.size(); ++i)
        stages.push_back(loss_from_json(
            seq[i], n, scheme, ctx + " sequence entry " + std::to_string(i),
            /*allow_combined=*/false));
      double epsilon = 1e-7;
      if (auto it = obj.find("epsilon"); it != obj.end()) {
        epsilon = number_value(*it, ctx, quoted("epsilon"));
        if (!(epsilon > 0.0)) fail(ctx, quoted("epsilon") + " must be positive");
      }
      return LossSpec::combined(std::move(stages), epsilon);
    }
    default:
      // Indifference, adjacency, and fairness take no parameters.
      reject_unknown_keys(obj, ctx, {"kind"});
      LossSpec loss;
      loss.kind = kind;
      return loss;
  }
}

// --- verification block --------------------------------------------------

ordered_json verification_to_json(const VerificationReport& v) {
  ordered_json out;
  out["primal_feasible"] = v.primal_feasible;
  out["worst_violation"] = v.worst_violation;
  out["x0_optimal"] = v.x0_optimal;
  out["normalization_ok"] = v.normalization_ok;
  out["forward_optimum"] = v.forward_optimum;
  out["co_optimal_observations"] = v.co_optimal_observations;
  return out;
}

VerificationReport verification_from_json(const ordered_json& v,
                                          const std::string& ctx) {
  const auto& obj = object_at(v, ctx);
  reject_unknown_keys(obj, ctx,
                      {"primal_feasible", "worst_violation", "x0_optimal",
                       "normalization_ok", "forward_optimum",
                       "co_optimal_observations"});
  VerificationReport out;
  out.primal_feasible = bool_value(required(obj, ctx, "primal_feasible"), ctx,
                                   quoted("primal_feasible"));
  out.worst_violation = number_value(required(obj, ctx, "worst_violation"), ctx,
                                     quoted("worst_violation"));
  out.x0_optimal =
      bool_value(required(obj, ctx, "x0_optimal"), ctx, quoted("x0_optimal"));
  out.normalization_ok = bool_value(required(obj, ctx, "normalization_ok"),
                                    ctx, quoted("normalization_ok"));
  out.forward_optimum = number_value(required(obj, ctx, "forward_optimum"),
                                     ctx, quoted("forward_optimum"));
  const auto& co = required(obj, ctx, "co_optimal_observations");
  if (!co.is_array())
    fail(ctx, quoted("co_optimal_observations") + " must be an array");
  for (const auto& e : co)
    out.co_optimal_observations.push_back(static_cast<int>(integer_value(
        e, ctx, "entry of " + quoted("co_optimal_observations"))));
  return out;
}

}  // namespace

// --- problem files ---------------------------------------------------------

ProblemFile parse_problem_json(const std::string& text) {
  const std::string ctx = "problem file";
  const ordered_json doc = parse_document(text, ctx);
  const auto& obj = object_at(doc, ctx);
  reject_unknown_keys(obj, ctx,
                      {"n", "c", "observations", "known", "m1",
                       "normalization", "loss", "seed"});

  ProblemFile pf;
  ProblemInstance& p = pf.problem;

  const long long n = integer_value(required(obj, ctx, "n"), ctx, quoted("n"));
  if (n < 1) fail(ctx, quoted("n") + " must be at least 1");
  p.n = static_cast<int>(n);

  p.c = number_array(required(obj, ctx, "c"), ctx, quoted("c"));
  if (static_cast<int>(p.c.size()) != p.n)
    fail(ctx, quoted("c") + " has " + std::to_string(p.c.size()) +
                  " entries, expected " + std::to_string(p.n));

  auto points = number_matrix(required(obj, ctx, "observations"), ctx,
                              quoted("observations"));
  if (points.empty()) fail(ctx, quoted("observations") + " must be non-empty");
  check_row_width(points, p.n, ctx, quoted("observations"));

  p.known.n = p.n;
  if (auto it = obj.find("known"); it != obj.end()) {
    const std::string kctx = ctx + " known";
    const auto& known_obj = object_at(*it, kctx);
    reject_unknown_keys(known_obj, kctx, {"G", "h"});
    auto G = number_matrix(required(known_obj, kctx, "G"), kctx, quoted("G"));
    auto h = number_array(required(known_obj, kctx, "h"), kctx, quoted("h"));
    if (G.size() != h.size())
      fail(kctx, quoted("G") + " has " + std::to_string(G.size()) +
                     " rows but " + quoted("h") + " has " +
                     std::to_string(h.size()) + " entries");
    check_row_width(G, p.n, kctx, quoted("G"));
    for (std::size_t i = 0; i < G.size(); ++i)
      p.known.add_row(std::move(G[i]), h[i]);
  }

  if (auto it = obj.find("m1"); it != obj.end()) {
    const long long m1 = integer_value(*it, ctx, quoted("m1"));
    if (m1 < 1) fail(ctx, quoted("m1") + " must be at least 1");
    p.m1 = static_cast<int>(m1);
  }

  if (auto it = obj.find("normalization"); it != obj.end()) {
    const std::string name = string_value(*it, ctx, quoted("normalization"));
    try {
      p.normalization = normalization_scheme_from_string(name);
    } catch (const Error& e) {
      fail(ctx, e.what());
    }
  }

  // Built after c so the preferred index is fixed by the cost ordering.
  try {
    p.obs = make_observation_set(std::move(points), p.c);
  } catch (const Error& e) {
    fail(ctx, e.what());
  }

  if (auto it = obj.find("loss"); it != obj.end())
    pf.loss = loss_from_json(*it, p.n, p.normalization, ctx + " loss",
                             /*allow_combined=*/true);

  if (auto it = obj.find("seed"); it != obj.end()) {
    const long long seed = integer_value(*it, ctx, quoted("seed"));
    if (seed < 0) fail(ctx, quoted("seed") + " must be non-negative");
    pf.seed = static_cast<std::uint64_t>(seed);
  }

  return pf;
}

ProblemFile load_problem_file(const std::string& path) {
  return parse_problem_json(read_text_file(path));
}

std::string render_problem_json(const ProblemFile& pf) {
  const ProblemInstance& p = pf.problem;
  ordered_json out;
  out["n"] = p.n;
  out["c"] = p.c;
  out["observations"] = p.obs.points;
  if (!p.known.rows.empty()) {
    ordered_json G = ordered_json::array();
    ordered_json h = ordered_json::array();
    for (const auto& row : p.known.rows) {
      G.push_back(row.a);
      h.push_back(row.b);
    }
    out["known"] = ordered_json{{"G", std::move(G)}, {"h", std::move(h)}};
  }
  out["m1"] = p.m1;
  out["normalization"] = to_string(p.normalization);
  if (pf.loss) out["loss"] = loss_to_json(*pf.loss);
  if (pf.seed) out["seed"] = *pf.seed;
  return out.dump(2) + "\n";
}

// --- region files ------------------------------------------------------

std::string render_region_json(const ImputedRegion& region) {
  const std::string ctx = "region render";
  ordered_json out;

  ordered_json A = ordered_json::array();
  ordered_json b = ordered_json::array();
  ordered_json row_tags = ordered_json::array();
  for (const auto& row : region.imputed_rows) {
    ordered_json coeffs = ordered_json::array();
    for (double v : row.a)
      coeffs.push_back(finite_or_fail(v, ctx, "row coefficient"));
    A.push_back(std::move(coeffs));
    b.push_back(finite_or_fail(row.b, ctx, "row offset"));
    row_tags.push_back(tag_to_json(row.tag));
  }
  out["A"] = std::move(A);
  out["b"] = std::move(b);

  ordered_json s_rows = ordered_json::array();
  for (const auto& row : region.known_set_S.rows)
    s_rows.push_back(constraint_row_to_json(row));
  out["S"] = ordered_json{{"n", region.known_set_S.n},
                          {"rows", std::move(s_rows)}};

  out["loss_value"] = finite_or_fail(region.loss_value, ctx, "loss value");

  ordered_json per_row = ordered_json::array();
  for (const auto& d : region.per_row_diagnostics)
    per_row.push_back(ordered_json{{"sigma", d.sigma},
                                   {"objective", d.subproblem_objective},
                                   {"nodes", d.nodes},
                                   {"iterations", d.iterations}});
  for (double v : region.stage_losses) finite_or_fail(v, ctx, "stage loss");
  out["diagnostics"] = ordered_json{{"row_tags", std::move(row_tags)},
                                    {"stage_losses", region.stage_losses},
                                    {"per_row", std::move(per_row)}};

  out["verification"] = verification_to_json(region.verification);
  return out.dump(2) + "\n";
}

ImputedRegion parse_region_json(const std::string& text) {
  const std::string ctx = "region file";
  const ordered_json doc = parse_document(text, ctx);
  const auto& obj = object_at(doc, ctx);
  reject_unknown_keys(
      obj, ctx, {"A", "b", "S", "loss_value", "diagnostics", "verification"});

  ImputedRegion region;

  const std::string sctx = ctx + " S";
  const auto& s_obj = object_at(required(obj, ctx, "S"), sctx);
  reject_unknown_keys(s_obj, sctx, {"n", "rows"});
  const long long n = integer_value(required(s_obj, sctx, "n"), sctx, quoted("n"));
  if (n < 1) fail(sctx, quoted("n") + " must be at least 1");
  region.known_set_S.n = static_cast<int>(n);
  const auto& s_rows = required(s_obj, sctx, "rows");
  if (!s_rows.is_array()) fail(sctx, quoted("rows") + " must be an array");
  for (std::size_t i = 0; i < s_rows.size(); ++i)
    region.known_set_S.rows.push_back(constraint_row_from_json(
        s_rows[i], region.known_set_S.n, sctx + " row " + std::to_string(i)));

  auto A = number_matrix(required(obj, ctx, "A"), ctx, quoted("A"));
  auto b = number_array(required(obj, ctx, "b"), ctx, quoted("b"));
  if (A.size() != b.size())
    fail(ctx, quoted("A") + " has " + std::to_string(A.size()) +
                  " rows but " + quoted("b") + " has " +
                  std::to_string(b.size()) + " entries");
  check_row_width(A, region.known_set_S.n, ctx, quoted("A"));

  region.loss_value = number_value(required(obj, ctx, "loss_value"), ctx,
                                   quoted("loss_value"));

  const std::string dctx = ctx + " diagnostics";
  const auto& diag = object_at(required(obj, ctx, "diagnostics"), dctx);
  reject_unknown_keys(diag, dctx, {"row_tags", "stage_losses", "per_row"});
  const auto& tags = required(diag, dctx, "row_tags");
  if (!tags.is_array() || tags.size() != A.size())
    fail(dctx, quoted("row_tags") + " must list one tag per imputed row");
  for (std::size_t i = 0; i < A.size(); ++i)
    region.imputed_rows.push_back(
        {std::move(A[i]), b[i],
         tag_from_json(tags[i], dctx + " row_tags entry " + std::to_string(i))});

  region.stage_losses = number_array(required(diag, dctx, "stage_losses"),
                                     dctx, quoted("stage_losses"));

  const auto& per_row = required(diag, dctx, "per_row");
  if (!per_row.is_array() || per_row.size() != A.size())
    fail(dctx, quoted("per_row") + " must list one entry per imputed row");
  for (std::size_t i = 0; i < per_row.size(); ++i) {
    const std::string rctx = dctx + " per_row entry " + std::to_string(i);
    const auto& e = object_at(per_row[i], rctx);
    reject_unknown_keys(e, rctx, {"sigma", "objective", "nodes", "iterations"});
    RowDiagnostics d;
    d.sigma = static_cast<int>(
        integer_value(required(e, rctx, "sigma"), rctx, quoted("sigma")));
    d.subproblem_objective =
        number_value(required(e, rctx, "objective"), rctx, quoted("objective"));
    d.nodes = static_cast<long>(
        integer_value(required(e, rctx, "nodes"), rctx, quoted("nodes")));
    d.iterations = static_cast<long>(integer_value(
        required(e, rctx, "iterations"), rctx, quoted("iterations")));
    region.per_row_diagnostics.push_back(d);
  }

  region.verification = verification_from_json(
      required(obj, ctx, "verification"), ctx + " verification");
  return region;
}

ImputedRegion load_region_file(const std::string& path) {
  return parse_region_json(read_text_file(path));
}

void save_region_file(const std::string& path, const ImputedRegion& region) {
  write_text_file(path, render_region_json(region));
}

// --- file IO ----------------------------------------------------------

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  if (in.bad()) throw Error("cannot read " + path);
  return buffer.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path + " for writing");
  out << text;
  out.flush();
  if (!out) throw Error("cannot write " + path);
}

}  // namespace feasregion
