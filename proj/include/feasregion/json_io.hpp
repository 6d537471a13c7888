#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "feasregion/imputation.hpp"

namespace feasregion {

/// A problem document: the instance itself plus the optional loss selection
/// and RNG seed the file carried. Schema (strict, unknown keys rejected):
///
///   { "n", "c": [...], "observations": [[...], ...],
///     "known": {"G": [[...], ...], "h": [...]},      // optional
///     "m1",                                          // optional, default 1
///     "normalization": "sum-proxy" | "l1-exact",     // optional
///     "loss": {...},                                 // optional, see below
///     "seed" }                                       // optional
///
/// The loss object holds {"kind": ...} plus the keys its kind admits:
/// adherence takes "prior": {"A", "b"} with optional "weights" and
/// "distance" ("l1" | "l2"); compactness takes an optional "big_m";
/// combined takes "sequence" (loss objects, non-combined) and an optional
/// "epsilon". Keys belonging to a different kind are rejected.
struct ProblemFile {
  ProblemInstance problem;
  std::optional<LossSpec> loss;
  std::optional<std::uint64_t> seed;
};

/// Parses a problem document. Malformed JSON and schema violations throw
/// Error with a message carrying nlohmann's line/column position or the
/// offending key. Adherence priors are normalized under the problem's
/// normalization scheme on entry.
ProblemFile parse_problem_json(const std::string& text);
ProblemFile load_problem_file(const std::string& path);

/// Canonical rendering of a problem document; parse(render(pf)) reproduces
/// the same instance (prior rows re-normalize to themselves).
std::string render_problem_json(const ProblemFile& pf);

/// Region document: { "A", "b", "S", "loss_value", "diagnostics",
/// "verification" }. "S" is {"n", "rows": [{"a", "b", "tag"}, ...]} with
/// tags {"kind": "sum-proxy" | "l1-exact" | "none", "sigma"}; "diagnostics"
/// holds "row_tags" (one per imputed row), "stage_losses", and "per_row"
/// [{"sigma", "objective", "nodes", "iterations"}, ...].
///
/// Round-trip is lossless at full double precision:
/// parse_region_json(render_region_json(r)) == r field for field.
std::string render_region_json(const ImputedRegion& region);
ImputedRegion parse_region_json(const std::string& text);
ImputedRegion load_region_file(const std::string& path);
void save_region_file(const std::string& path, const ImputedRegion& region);

/// Whole-file text IO; throws Error naming the path on failure.
std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace feasregion
