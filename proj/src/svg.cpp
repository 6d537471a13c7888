#include "feasregion/svg.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <vector>

#include "feasregion/json_io.hpp"

namespace feasregion {
namespace {

constexpr double kCanvas = 640.0;
constexpr double kEdgeEps = 1e-9;

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

struct Mapping {
  Viewport vp;
  double sx = 1.0, sy = 1.0;

  double px(double x) const { return (x - vp.xmin) * sx; }
  // SVG y grows downward; world y grows upward.
  double py(double y) const { return kCanvas - (y - vp.ymin) * sy; }
};

Mapping fit_viewport(const ObservationSet& obs) {
  double xmin = obs.points[0][0], xmax = xmin;
  double ymin = obs.points[0][1], ymax = ymin;
  for (const auto& p : obs.points) {
    xmin = std::min(xmin, p[0]);
    xmax = std::max(xmax, p[0]);
    ymin = std::min(ymin, p[1]);
    ymax = std::max(ymax, p[1]);
  }
  // A flat axis still needs area to draw into.
  if (xmax - xmin < 1e-12) { xmin -= 1.0; xmax += 1.0; }
  if (ymax - ymin < 1e-12) { ymin -= 1.0; ymax += 1.0; }
  const double padx = 0.2 * (xmax - xmin);
  const double pady = 0.2 * (ymax - ymin);
  Mapping m;
  m.vp = {xmin - padx, xmax + padx, ymin - pady, ymax + pady};
  m.sx = kCanvas / (m.vp.xmax - m.vp.xmin);
  m.sy = kCanvas / (m.vp.ymax - m.vp.ymin);
  return m;
}

// The segment of the line a'x = b crossing the viewport, or empty.
std::vector<std::array<double, 2>> line_in_viewport(const ConstraintRow& row,
                                                    const Viewport& vp) {
  const double a0 = row.a[0], a1 = row.a[1], b = row.b;
  const double ex = kEdgeEps * (1.0 + std::abs(vp.xmax) + std::abs(vp.xmin));
  const double ey = kEdgeEps * (1.0 + std::abs(vp.ymax) + std::abs(vp.ymin));
  std::vector<std::array<double, 2>> pts;
  if (std::abs(a1) > kEdgeEps) {
    for (double vx : {vp.xmin, vp.xmax}) {
      const double y = (b - a0 * vx) / a1;
      if (y >= vp.ymin - ey && y <= vp.ymax + ey)
        pts.push_back({vx, std::clamp(y, vp.ymin, vp.ymax)});
    }
  }
  if (std::abs(a0) > kEdgeEps) {
    for (double vy : {vp.ymin, vp.ymax}) {
      const double x = (b - a1 * vy) / a0;
      if (x >= vp.xmin - ex && x <= vp.xmax + ex)
        pts.push_back({std::clamp(x, vp.xmin, vp.xmax), vy});
    }
  }
  // Order along the line direction and keep the extremes; corner hits
  // appear twice and collapse here.
  const double dx = -a1, dy = a0;
  std::sort(pts.begin(), pts.end(),
            [&](const auto& p, const auto& q) {
              return p[0] * dx + p[1] * dy < q[0] * dx + q[1] * dy;
            });
  if (pts.size() >= 2) {
    const auto& f = pts.front();
    const auto& l = pts.back();
    if (std::hypot(l[0] - f[0], l[1] - f[1]) > 1e-9) return {f, l};
  }
  return {};
}

void draw_row(std::ostringstream& out, const ConstraintRow& row,
              const Mapping& m, const char* color, const char* dash) {
  const auto seg = line_in_viewport(row, m.vp);
  if (seg.empty()) return;
  out << "  <line x1=\"" << num(m.px(seg[0][0])) << "\" y1=\""
      << num(m.py(seg[0][1])) << "\" x2=\"" << num(m.px(seg[1][0]))
      << "\" y2=\"" << num(m.py(seg[1][1])) << "\" stroke=\"" << color
      << "\" stroke-width=\"1.5\" stroke-dasharray=\"" << dash << "\"/>\n";
}

}  // namespace

std::string render_region_svg(const ImputedRegion& region,
                              const ObservationSet& obs) {
  if (region.known_set_S.n != 2 || obs.dimension() != 2)
    throw DimensionError("plotting requires n = 2");

  const Mapping m = fit_viewport(obs);
  const Polyhedron full = region.full_region();

  std::vector<std::array<double, 2>> vertices;
  bool empty_region = false;
  try {
    vertices = region_vertices_2d(full, m.vp);
  } catch (const EmptyRegion&) {
    empty_region = true;
  }
  const bool clipped =
      !empty_region && region_touches_viewport(vertices, m.vp);

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" "
         "height=\"640\" viewBox=\"0 0 640 640\">\n";
  out << "  <defs>\n"
         "    <pattern id=\"hatch\" width=\"8\" height=\"8\" "
         "patternUnits=\"userSpaceOnUse\" patternTransform=\"rotate(45)\">\n"
         "      <line x1=\"0\" y1=\"0\" x2=\"0\" y2=\"8\" "
         "stroke=\"#3182bd\" stroke-width=\"1\"/>\n"
         "    </pattern>\n"
         "  </defs>\n";
  out << "  <rect x=\"0\" y=\"0\" width=\"640\" height=\"640\" "
         "fill=\"#ffffff\" stroke=\"#bbbbbb\" stroke-width=\"1\"/>\n";

  if (!empty_region && vertices.size() >= 3) {
    std::ostringstream pts;
    for (std::size_t i = 0; i < vertices.size(); ++i) {
      if (i) pts << ' ';
      pts << num(m.px(vertices[i][0])) << ',' << num(m.py(vertices[i][1]));
    }
    out << "  <polygon points=\"" << pts.str()
        << "\" fill=\"#9ecae1\" fill-opacity=\"0.45\" stroke=\"#3182bd\" "
           "stroke-width=\"1.5\"/>\n";
    if (clipped)
      out << "  <polygon points=\"" << pts.str()
          << "\" fill=\"url(#hatch)\" fill-opacity=\"0.5\" stroke=\"none\"/>\n";
  }

  for (const auto& row : region.known_set_S.rows)
    draw_row(out, row, m, "#636363", "2,4");
  for (const auto& row : region.imputed_rows)
    draw_row(out, row, m, "#d62728", "7,4");

  for (std::size_t i = 0; i < obs.points.size(); ++i) {
    if (static_cast<int>(i) == obs.preferred_index) continue;
    out << "  <circle cx=\"" << num(m.px(obs.points[i][0])) << "\" cy=\""
        << num(m.py(obs.points[i][1]))
        << "\" r=\"4\" fill=\"#1f77b4\"/>\n";
  }
  const auto& x0 = obs.preferred();
  out << "  <circle cx=\"" << num(m.px(x0[0])) << "\" cy=\""
      << num(m.py(x0[1]))
      << "\" r=\"6\" fill=\"#ff7f0e\" stroke=\"#000000\" "
         "stroke-width=\"1.5\"/>\n";

  if (empty_region)
    out << "  <text x=\"12\" y=\"24\" font-family=\"sans-serif\" "
           "font-size=\"14\" fill=\"#636363\">empty region</text>\n";
  else if (clipped)
    out << "  <text x=\"12\" y=\"24\" font-family=\"sans-serif\" "
           "font-size=\"14\" fill=\"#636363\">region clipped to "
           "viewport</text>\n";

  out << "</svg>\n";
  return out.str();
}

void save_region_svg(const std::string& path, const ImputedRegion& region,
                     const ObservationSet& obs) {
  write_text_file(path, render_region_svg(region, obs));
}

}  // namespace feasregion
