#pragma once

// Artifact writers for run outputs: legacy-ASCII VTK fields, per-cell
// estimator tables, the convergence history CSV, and a dependency-free SVG
// line chart for quick-look plots. CSVs are the source of truth and must be
// bitwise reproducible, so every double goes through fmt_g17 and no
// wall-clock data is ever written here.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "goaladapt/adapt.hpp"
#include "goaladapt/assembly.hpp"
#include "goaladapt/core.hpp"
#include "goaladapt/dwr.hpp"
#include "goaladapt/mesh.hpp"
#include "goaladapt/space.hpp"

namespace goaladapt {

namespace detail {

inline std::ofstream open_out(const std::string& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open output file '" + path + "'");
  return os;
}

}  // namespace detail

// Displacement (point vectors), estimator / active-stress magnitude / region
// (cell scalars) on one mesh. Works for any degree because vertex nodes come
// first in the space: the displacement at vertex v is coeffs[2v], coeffs[2v+1].
inline void write_vtk(const std::string& path, const FeField& u, const CaseData& cs,
                      const std::vector<double>& eta_k) {
  const FunctionSpace& space = *u.space;
  const TriMesh& mesh = space.mesh();
  if (static_cast<int>(eta_k.size()) != mesh.cell_count())
    throw Error("write_vtk: estimator array does not match the mesh");

  std::ofstream os = detail::open_out(path);
  os << "# vtk DataFile Version 3.0\n";
  os << "goaladapt fields\n";
  os << "ASCII\n";
  os << "DATASET UNSTRUCTURED_GRID\n";

  os << "POINTS " << mesh.vertex_count() << " double\n";
  for (int v = 0; v < mesh.vertex_count(); ++v) {
    const Vec2& p = mesh.vertex(v);
    os << fmt_g17(p.x()) << " " << fmt_g17(p.y()) << " 0\n";
  }

  os << "CELLS " << mesh.cell_count() << " " << 4 * mesh.cell_count() << "\n";
  for (int c = 0; c < mesh.cell_count(); ++c) {
    const auto& cell = mesh.cell(c);
    os << "3 " << cell[0] << " " << cell[1] << " " << cell[2] << "\n";
  }
  os << "CELL_TYPES " << mesh.cell_count() << "\n";
  for (int c = 0; c < mesh.cell_count(); ++c) os << "5\n";

  os << "POINT_DATA " << mesh.vertex_count() << "\n";
  os << "VECTORS displacement double\n";
  for (int v = 0; v < mesh.vertex_count(); ++v)
    os << fmt_g17(u.coeffs[2 * v]) << " " << fmt_g17(u.coeffs[2 * v + 1]) << " 0\n";

  std::vector<Mat2> sigma(mesh.cell_count());
  for (int c = 0; c < mesh.cell_count(); ++c)
    sigma[c] = stress(u, cs.materials, cs.activation, c, mesh.centroid(c));

  os << "CELL_DATA " << mesh.cell_count() << "\n";
  os << "SCALARS eta_k double 1\n";
  os << "LOOKUP_TABLE default\n";
  for (int c = 0; c < mesh.cell_count(); ++c) os << fmt_g17(eta_k[c]) << "\n";

  os << "SCALARS sigma_a_magnitude double 1\n";
  os << "LOOKUP_TABLE default\n";
  for (int c = 0; c < mesh.cell_count(); ++c) os << fmt_g17(sigma[c].norm()) << "\n";

  os << "SCALARS region int 1\n";
  os << "LOOKUP_TABLE default\n";
  for (int c = 0; c < mesh.cell_count(); ++c) os << mesh.flags(c).region << "\n";

  // In-plane active stress at the centroid, embedded in the 3x3 layout VTK
  // expects for tensor data.
  os << "TENSORS sigma_a double\n";
  for (int c = 0; c < mesh.cell_count(); ++c) {
    const Mat2& s = sigma[c];
    os << fmt_g17(s(0, 0)) << " " << fmt_g17(s(0, 1)) << " 0\n";
    os << fmt_g17(s(1, 0)) << " " << fmt_g17(s(1, 1)) << " 0\n";
    os << "0 0 0\n";
  }
  if (!os) throw IoError("failed writing '" + path + "'");
}

// Audit dump of the displacement coefficients by scalar node.
inline void write_coeffs_csv(const std::string& path, const FeField& u) {
  const FunctionSpace& space = *u.space;
  std::ofstream os = detail::open_out(path);
  os << "node,x,y,ux,uy\n";
  for (int n = 0; n < space.scalar_node_count(); ++n) {
    const Vec2& p = space.node_coord(n);
    os << n << "," << fmt_g17(p.x()) << "," << fmt_g17(p.y()) << "," << fmt_g17(u.coeffs[2 * n])
       << "," << fmt_g17(u.coeffs[2 * n + 1]) << "\n";
  }
  if (!os) throw IoError("failed writing '" + path + "'");
}

inline void write_estimators_csv(const std::string& path, const TriMesh& mesh,
                                 const LocalEstimates& locals) {
  if (static_cast<int>(locals.eta.size()) != mesh.cell_count())
    throw Error("write_estimators_csv: estimator array does not match the mesh");
  std::ofstream os = detail::open_out(path);
  os << "cell_id,eta_k,signed,area,region\n";
  for (int c = 0; c < mesh.cell_count(); ++c) {
    os << c << "," << fmt_g17(locals.eta[c]) << "," << fmt_g17(locals.signed_contrib[c]) << ","
       << fmt_g17(mesh.cell_area(c)) << "," << mesh.flags(c).region << "\n";
  }
  if (!os) throw IoError("failed writing '" + path + "'");
}

// One row per loop iteration. The reference columns are present whenever any
// iteration carries a true error; gated effectivities stay blank.
inline void write_convergence_csv(const std::string& path, const ConvergenceRecord& record) {
  bool with_reference = false;
  for (const auto& r : record.iterations)
    if (r.true_error) with_reference = true;

  auto opt = [](const std::optional<double>& v) { return v ? fmt_g17(*v) : std::string(); };

  std::ofstream os = detail::open_out(path);
  os << "iteration,cells,dofs,qoi_value,eta_h,sum_eta_k,marked";
  if (with_reference) os << ",true_error,effectivity_h,effectivity_sum";
  os << "\n";
  for (const auto& r : record.iterations) {
    os << r.iteration << "," << r.cell_count << "," << r.dof_count << ","
       << fmt_g17(r.qoi_value) << "," << fmt_g17(r.eta_h) << "," << fmt_g17(r.sum_eta_k) << ","
       << r.marked_count;
    if (with_reference)
      os << "," << opt(r.true_error) << "," << opt(r.effectivity_h) << ","
         << opt(r.effectivity_sum);
    os << "\n";
  }
  if (!os) throw IoError("failed writing '" + path + "'");
}

struct ChartSeries {
  std::string label;
  std::vector<Vec2> points;  // (x, y); nonpositive coordinates are dropped on log axes
  std::string color = "#d62728";
};

namespace detail {

inline std::string svg_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '&')
      out += "&amp;";
    else if (c == '<')
      out += "&lt;";
    else if (c == '>')
      out += "&gt;";
    else
      out += c;
  }
  return out;
}

inline std::string tick_label(double v, bool log_axis) {
  char buf[48];
  if (log_axis) {
    std::snprintf(buf, sizeof buf, "1e%d", static_cast<int>(std::lround(v)));
  } else {
    std::snprintf(buf, sizeof buf, "%.4g", v);
  }
  return buf;
}

}  // namespace detail

// Minimal line chart: data polylines with point markers, decade ticks on log
// axes, a handful of round ticks on linear ones, and a legend. Pure text SVG
// so runs stay free of plotting dependencies.
inline void write_chart_svg(const std::string& path, const std::string& title,
                            const std::string& xlabel, const std::string& ylabel, bool logx,
                            bool logy, const std::vector<ChartSeries>& series) {
  const double width = 760.0, height = 520.0;
  const double ml = 78.0, mr = 24.0, mt = 46.0, mb = 58.0;
  const double pw = width - ml - mr, ph = height - mt - mb;

  auto tx = [logx](double v) { return logx ? std::log10(v) : v; };
  auto ty = [logy](double v) { return logy ? std::log10(v) : v; };
  auto usable = [logx, logy](const Vec2& p) {
    return std::isfinite(p.x()) && std::isfinite(p.y()) && (!logx || p.x() > 0.0) &&
           (!logy || p.y() > 0.0);
  };

  double x0 = 0.0, x1 = 0.0, y0 = 0.0, y1 = 0.0;
  bool any = false;
  for (const auto& s : series)
    for (const auto& p : s.points) {
      if (!usable(p)) continue;
      double x = tx(p.x()), y = ty(p.y());
      if (!any) {
        x0 = x1 = x;
        y0 = y1 = y;
        any = true;
      }
      x0 = std::min(x0, x), x1 = std::max(x1, x);
      y0 = std::min(y0, y), y1 = std::max(y1, y);
    }
  if (!any) {
    x0 = y0 = 0.0;
    x1 = y1 = 1.0;
  }
  auto pad = [](double& lo, double& hi, bool log_axis) {
    double span = hi - lo;
    if (span <= 0.0) span = log_axis ? 1.0 : (std::abs(lo) > 0.0 ? std::abs(lo) : 1.0);
    lo -= 0.05 * span;
    hi += 0.05 * span;
  };
  pad(x0, x1, logx);
  pad(y0, y1, logy);

  auto px = [&](double v) { return ml + (tx(v) - x0) / (x1 - x0) * pw; };
  auto py = [&](double v) { return mt + ph - (ty(v) - y0) / (y1 - y0) * ph; };

  // Tick positions in transformed coordinates: decades on log axes, ~6 round
  // steps otherwise.
  auto ticks = [](double lo, double hi, bool log_axis) {
    std::vector<double> t;
    if (log_axis) {
      for (int e = static_cast<int>(std::ceil(lo)); e <= static_cast<int>(std::floor(hi)); ++e)
        t.push_back(e);
      if (t.empty()) t = {lo, hi};
      return t;
    }
    double span = hi - lo;
    double step = std::pow(10.0, std::floor(std::log10(span / 5.0)));
    if (span / step > 10.0) step *= 2.0;
    if (span / step > 10.0) step *= 2.5;
    for (double v = std::ceil(lo / step) * step; v <= hi + 1e-12 * span; v += step)
      t.push_back(v);
    return t;
  };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
     << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
  os << "<rect width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";
  os << "<text x=\"" << width / 2 << "\" y=\"26\" text-anchor=\"middle\" font-family=\"sans-serif\""
     << " font-size=\"16\">" << detail::svg_escape(title) << "</text>\n";

  for (double t : ticks(x0, x1, logx)) {
    double x = ml + (t - x0) / (x1 - x0) * pw;
    os << "<line x1=\"" << x << "\" y1=\"" << mt << "\" x2=\"" << x << "\" y2=\"" << mt + ph
       << "\" stroke=\"#dddddd\"/>\n";
    os << "<text x=\"" << x << "\" y=\"" << mt + ph + 18
       << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">"
       << detail::tick_label(t, logx) << "</text>\n";
  }
  for (double t : ticks(y0, y1, logy)) {
    double y = mt + ph - (t - y0) / (y1 - y0) * ph;
    os << "<line x1=\"" << ml << "\" y1=\"" << y << "\" x2=\"" << ml + pw << "\" y2=\"" << y
       << "\" stroke=\"#dddddd\"/>\n";
    os << "<text x=\"" << ml - 6 << "\" y=\"" << y + 4
       << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
       << detail::tick_label(t, logy) << "</text>\n";
  }
  os << "<rect x=\"" << ml << "\" y=\"" << mt << "\" width=\"" << pw << "\" height=\"" << ph
     << "\" fill=\"none\" stroke=\"#333333\"/>\n";
  os << "<text x=\"" << ml + pw / 2 << "\" y=\"" << height - 14
     << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">"
     << detail::svg_escape(xlabel) << "</text>\n";
  os << "<text x=\"20\" y=\"" << mt + ph / 2 << "\" text-anchor=\"middle\""
     << " font-family=\"sans-serif\" font-size=\"13\" transform=\"rotate(-90 20 " << mt + ph / 2
     << ")\">" << detail::svg_escape(ylabel) << "</text>\n";

  for (const auto& s : series) {
    std::ostringstream pts;
    for (const auto& p : s.points) {
      if (!usable(p)) continue;
      pts << px(p.x()) << "," << py(p.y()) << " ";
    }
    os << "<polyline points=\"" << pts.str() << "\" fill=\"none\" stroke=\"" << s.color
       << "\" stroke-width=\"1.8\"/>\n";
    for (const auto& p : s.points) {
      if (!usable(p)) continue;
      os << "<circle cx=\"" << px(p.x()) << "\" cy=\"" << py(p.y()) << "\" r=\"3\" fill=\""
         << s.color << "\"/>\n";
    }
  }

  double ly = mt + 14.0;
  for (const auto& s : series) {
    os << "<line x1=\"" << ml + pw - 150 << "\" y1=\"" << ly << "\" x2=\"" << ml + pw - 126
       << "\" y2=\"" << ly << "\" stroke=\"" << s.color << "\" stroke-width=\"1.8\"/>\n";
    os << "<text x=\"" << ml + pw - 120 << "\" y=\"" << ly + 4
       << "\" font-family=\"sans-serif\" font-size=\"12\">" << detail::svg_escape(s.label)
       << "</text>\n";
    ly += 18.0;
  }

  os << "</svg>\n";
  std::ofstream file = detail::open_out(path);
  file << os.str();
  if (!file) throw IoError("failed writing '" + path + "'");
}

}  // namespace goaladapt
