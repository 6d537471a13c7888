#pragma once

#include <string>

#include "feasregion/imputation.hpp"

namespace feasregion {

/// Renders a 2-D region as a standalone SVG document: observations as dots,
/// the preferred one highlighted, known rows dotted, imputed rows dashed, and
/// the region shaded. The viewport fits the observations plus a 20% margin;
/// a region escaping it is clipped and overlaid with a hatch plus a note.
/// Output is deterministic: fixed element order, coordinates at 6 decimals.
/// Throws DimensionError unless the region lives in n = 2.
std::string render_region_svg(const ImputedRegion& region,
                              const ObservationSet& obs);

void save_region_svg(const std::string& path, const ImputedRegion& region,
                     const ObservationSet& obs);

}  // namespace feasregion
