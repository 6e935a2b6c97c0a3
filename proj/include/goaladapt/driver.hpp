#pragma once

// End-to-end run orchestration behind the command-line tool: resolve a case,
// pick the reference QoI, drive the requested loop, and persist the artifact
// tree. Also the two-run comparison that overlays convergence histories.
//
// Artifact tree for run():
//   out/manifest.ini        inputs as resolved + result report (incl. timings)
//   out/convergence.csv     one row per iteration (timing-free, bitwise stable)
//   out/summary.txt         human-readable recap
//   out/error.svg           eta_h (and true error, when known) vs cells
//   out/iter_NNN/           mesh.txt, fields.vtk, estimators.csv, coeffs.csv
//
// Exit codes: 0 success (tol reached or iteration cap), 2 configuration or
// mesh input errors, 3 solver or internal failures, 4 I/O failures.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "goaladapt/adapt.hpp"
#include "goaladapt/cases.hpp"
#include "goaladapt/export.hpp"
#include "goaladapt/mesh_io.hpp"

namespace goaladapt {

inline constexpr const char* kToolVersion = "1.0.0";

struct RunManifest {
  std::string case_id;            // built-in name, or config path when from_config
  bool from_config = false;
  std::optional<QoiVariant> qoi;  // default: the case's own QoI
  int degree = 2;
  double alpha = 0.8;
  std::optional<double> tol;      // default: the case preset for the chosen QoI
  int max_iterations = 12;        // uniform mode reads this as the round count
  AdaptMode mode = AdaptMode::adaptive;
  std::string out_dir;
  int reference_rounds = 0;       // >= 2: Richardson reference; 0: exact value when known
  unsigned seed = 0;              // reserved; nothing in the pipeline is randomized
};

namespace detail {

inline void make_dirs(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory '" + dir + "': " + ec.message());
}

inline std::string iter_dir(const std::string& out, int iteration) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "iter_%03d", iteration);
  return out + "/" + buf;
}

inline std::string seconds_str(double s) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", s);
  return buf;
}

inline std::string human(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

inline std::string percent_str(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f%%", 100.0 * fraction);
  return buf;
}

class StageClock {
 public:
  double lap() {
    auto now = std::chrono::steady_clock::now();
    double s = std::chrono::duration<double>(now - last_).count();
    last_ = now;
    return s;
  }
  double total() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
  std::chrono::steady_clock::time_point last_ = start_;
};

// Reference provenance for reports: how the "true" QoI was obtained.
struct ReferenceInfo {
  std::string kind = "none";  // none | exact | richardson
  std::optional<ReferenceQoi> ref;
};

inline ReferenceInfo resolve_reference(const ProblemCase& pc, QoiVariant variant, int degree,
                                       int rounds) {
  if (rounds < 0 || rounds == 1)
    throw ConfigError("reference rounds must be 0 (exact value when known) or at least 2");
  ReferenceInfo info;
  if (rounds >= 2) {
    info.kind = "richardson";
    info.ref = reference_qoi(pc.mesh, pc.data, QoISpec{variant}, degree, rounds);
    return info;
  }
  const std::optional<double>& exact =
      variant == QoiVariant::J1 ? pc.exact_j1 : pc.exact_j2;
  if (exact) {
    info.kind = "exact";
    info.ref = ReferenceQoi{*exact, 0.0, 0, 0};
  }
  return info;
}

struct RunReport {
  ConvergenceRecord record;
  FieldStats final_stats;
  double setup_s = 0.0, reference_s = 0.0, loop_s = 0.0, export_s = 0.0, total_s = 0.0;
};

inline void write_manifest_ini(const std::string& path, const RunManifest& m,
                               const ProblemCase& pc, QoiVariant variant, double tol,
                               const ReferenceInfo& ri, const RunReport& rr) {
  std::ofstream os = open_out(path);
  os << "[run]\n";
  os << "version = " << kToolVersion << "\n";
  os << (m.from_config ? "config = " : "case = ") << m.case_id << "\n";
  os << "qoi = " << qoi_name(variant) << "\n";
  os << "degree = " << m.degree << "\n";
  os << "alpha = " << fmt_g17(m.alpha) << "\n";
  os << "tol = " << fmt_g17(tol) << "\n";
  os << "max_iterations = " << m.max_iterations << "\n";
  os << "mode = " << (m.mode == AdaptMode::adaptive ? "adaptive" : "uniform") << "\n";
  os << "reference_rounds = " << m.reference_rounds << "\n";
  os << "seed = " << m.seed << "\n";
  os << "out_dir = " << m.out_dir << "\n";
  os << "\n[report]\n";
  os << "case_name = " << pc.name << "\n";
  os << "mesh_source = " << pc.mesh_source << "\n";
  os << "status = " << loop_status_name(rr.record.status) << "\n";
  os << "iterations = " << rr.record.iterations.size() << "\n";
  if (!rr.record.iterations.empty()) {
    const IterationRecord& last = rr.record.iterations.back();
    os << "final_cells = " << last.cell_count << "\n";
    os << "final_dofs = " << last.dof_count << "\n";
    os << "final_qoi_value = " << fmt_g17(last.qoi_value) << "\n";
    os << "final_eta_h = " << fmt_g17(last.eta_h) << "\n";
    if (last.true_error) os << "final_true_error = " << fmt_g17(*last.true_error) << "\n";
  }
  os << "reference = " << ri.kind << "\n";
  if (ri.ref) {
    os << "reference_value = " << fmt_g17(ri.ref->value) << "\n";
    os << "reference_uncertainty = " << fmt_g17(ri.ref->uncertainty) << "\n";
    if (ri.kind == "richardson") {
      os << "reference_solve_rounds = " << ri.ref->rounds << "\n";
      os << "reference_cells = " << ri.ref->cells << "\n";
    }
  }
  os << "max_strain_intensity = " << fmt_g17(rr.final_stats.max_strain_intensity) << "\n";
  os << "max_rel_displacement = " << fmt_g17(rr.final_stats.max_rel_displacement) << "\n";
  os << "setup_seconds = " << seconds_str(rr.setup_s) << "\n";
  os << "reference_seconds = " << seconds_str(rr.reference_s) << "\n";
  os << "loop_seconds = " << seconds_str(rr.loop_s) << "\n";
  os << "export_seconds = " << seconds_str(rr.export_s) << "\n";
  os << "total_seconds = " << seconds_str(rr.total_s) << "\n";
  if (!os) throw IoError("failed writing '" + path + "'");
}

inline void write_summary_txt(const std::string& path, const RunManifest& m,
                              const ProblemCase& pc, QoiVariant variant, double tol,
                              const ReferenceInfo& ri, const RunReport& rr) {
  std::ofstream os = open_out(path);
  os << "run summary\n===========\n";
  os << "case: " << pc.name << " (" << pc.mesh_source << ")\n";
  os << "initial mesh: " << pc.mesh.cell_count() << " cells, " << pc.mesh.vertex_count()
     << " vertices\n";
  os << "QoI: " << qoi_name(variant) << ", primal degree " << m.degree << " (dual degree "
     << m.degree + 1 << ")\n";
  if (m.mode == AdaptMode::adaptive)
    os << "mode: adaptive, alpha = " << human(m.alpha) << ", tol = " << human(tol)
       << ", max iterations = " << m.max_iterations << "\n";
  else
    os << "mode: uniform, rounds = " << m.max_iterations << "\n";
  os << "status: " << loop_status_name(rr.record.status) << " after "
     << rr.record.iterations.size() << " iteration(s)\n";
  if (!rr.record.iterations.empty()) {
    const IterationRecord& last = rr.record.iterations.back();
    os << "final: cells = " << last.cell_count << ", dofs = " << last.dof_count
       << ", QoI = " << human(last.qoi_value) << ", eta_h = " << human(last.eta_h) << "\n";
    if (ri.kind == "exact")
      os << "reference: exact closed form, value = " << human(ri.ref->value) << "\n";
    else if (ri.kind == "richardson")
      os << "reference: Richardson pair on " << ri.ref->rounds
         << " uniform rounds (finest mesh " << ri.ref->cells
         << " cells), value = " << human(ri.ref->value)
         << ", uncertainty = " << human(ri.ref->uncertainty) << "\n";
    else
      os << "reference: none (error and effectivity columns omitted)\n";
    if (last.true_error) {
      os << "final true error: " << human(*last.true_error);
      if (last.effectivity_h)
        os << ", effectivity eta_h = " << human(*last.effectivity_h)
           << ", effectivity sum eta_K = " << human(*last.effectivity_sum);
      else
        os << " (effectivities withheld: error within 10x reference uncertainty)";
      os << "\n";
    }
  }
  os << "small-strain check: max strain intensity = "
     << percent_str(rr.final_stats.max_strain_intensity)
     << ", max relative displacement = " << percent_str(rr.final_stats.max_rel_displacement)
     << " (guideline: both < 10%)";
  bool within = rr.final_stats.max_strain_intensity < 0.10 &&
                rr.final_stats.max_rel_displacement < 0.10;
  os << (within ? " -> within range\n" : " -> exceeded\n");
  if (!pc.small_strain_expected)
    os << "  note: this case is a convergence benchmark, not a physical regime;"
       << " the check is report-only\n";
  for (const std::string& w : pc.warnings) os << "warning: " << w << "\n";
  os << "timings: setup " << seconds_str(rr.setup_s) << "s, reference "
     << seconds_str(rr.reference_s) << "s, loop " << seconds_str(rr.loop_s) << "s, export "
     << seconds_str(rr.export_s) << "s, total " << seconds_str(rr.total_s) << "s\n";
  os << "artifacts: manifest.ini, convergence.csv, error.svg, iter_NNN/{mesh.txt, fields.vtk,"
     << " estimators.csv, coeffs.csv}\n";
  if (!os) throw IoError("failed writing '" + path + "'");
}

inline void run_checked(const RunManifest& m) {
  StageClock clock;
  if (m.out_dir.empty()) throw ConfigError("output directory is required");
  if (m.degree < 1 || m.degree > 2) throw ConfigError("degree must be 1 or 2");

  ProblemCase pc = m.from_config ? load_case_config(m.case_id) : make_case(m.case_id);
  const QoiVariant variant = m.qoi ? *m.qoi : pc.default_qoi;
  const double tol = m.tol ? *m.tol : pc.preset_tol(variant);
  const QoISpec qspec{variant};
  RunReport rr;
  rr.setup_s = clock.lap();

  ReferenceInfo ri = resolve_reference(pc, variant, m.degree, m.reference_rounds);
  rr.reference_s = clock.lap();

  make_dirs(m.out_dir);
  const std::vector<TriPoint> stats_rule = rules_for_degree(m.degree).cell;
  LoopObserver observer = [&](int iteration, const TriMesh& mesh, const CaseData& cs,
                              const IterationSolution& it, const EstimateReport&,
                              const std::vector<int>&) {
    std::string dir = iter_dir(m.out_dir, iteration);
    make_dirs(dir);
    save_trimesh(mesh, dir + "/mesh.txt");
    write_vtk(dir + "/fields.vtk", it.u, cs, it.locals.eta);
    write_estimators_csv(dir + "/estimators.csv", mesh, it.locals);
    write_coeffs_csv(dir + "/coeffs.csv", it.u);
    rr.final_stats = field_stats(it.u, stats_rule);
  };

  if (m.mode == AdaptMode::adaptive) {
    AdaptConfig cfg;
    cfg.alpha = m.alpha;
    cfg.tol = tol;
    cfg.max_iterations = m.max_iterations;
    cfg.degree = m.degree;
    rr.record = adaptive_loop(pc.mesh, pc.data, qspec, cfg, ri.ref, observer);
  } else {
    const int rounds = m.max_iterations;
    if (pc.mesh.cell_count() * std::pow(4.0, rounds) > 2e6)
      throw ConfigError("uniform refinement would exceed the cell budget (2e6 cells)");
    rr.record = uniform_loop(pc.mesh, pc.data, qspec, m.degree, rounds, ri.ref, observer);
  }
  rr.loop_s = clock.lap();

  write_convergence_csv(m.out_dir + "/convergence.csv", rr.record);
  std::vector<ChartSeries> series(1);
  series[0].label = "eta_h";
  series[0].color = "#1f77b4";
  bool any_error = false;
  for (const IterationRecord& r : rr.record.iterations) {
    series[0].points.emplace_back(r.cell_count, r.eta_h);
    if (r.true_error) any_error = true;
  }
  if (any_error) {
    ChartSeries err{"true error", {}, "#d62728"};
    for (const IterationRecord& r : rr.record.iterations)
      if (r.true_error) err.points.emplace_back(r.cell_count, *r.true_error);
    series.push_back(std::move(err));
  }
  write_chart_svg(m.out_dir + "/error.svg",
                  std::string(pc.name) + " " + qoi_name(variant) + " convergence", "cells",
                  "error", true, true, series);
  rr.export_s = clock.lap();
  rr.total_s = clock.total();
  write_manifest_ini(m.out_dir + "/manifest.ini", m, pc, variant, tol, ri, rr);
  write_summary_txt(m.out_dir + "/summary.txt", m, pc, variant, tol, ri, rr);
}

// Parsed convergence.csv plus the identity keys from manifest.ini.
struct LoadedRun {
  std::string label;
  std::string case_name;
  std::string qoi;
  std::optional<double> reference_value;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const {
    for (size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return static_cast<int>(i);
    return -1;
  }
  std::optional<double> value(const std::vector<std::string>& row, int col) const {
    if (col < 0 || col >= static_cast<int>(row.size()) || row[col].empty()) return std::nullopt;
    return parse_double(row[col], "convergence.csv value");
  }
};

inline LoadedRun load_run(const std::string& dir) {
  LoadedRun run;
  std::string trimmed = dir;
  while (trimmed.size() > 1 && trimmed.back() == '/') trimmed.pop_back();
  run.label = std::filesystem::path(trimmed).filename().string();
  if (run.label.empty()) run.label = trimmed;

  std::ifstream mf(dir + "/manifest.ini");
  if (!mf) throw IoError("cannot open '" + dir + "/manifest.ini' (not a finished run?)");
  IniFile ini = parse_ini(mf, dir + "/manifest.ini");
  Section runsec(ini, "run", true);
  run.qoi = runsec.require("qoi");
  Section report(ini, "report", true);
  run.case_name = report.require("case_name");
  if (auto rv = report.get("reference_value"))
    run.reference_value = parse_double(*rv, "report.reference_value");

  std::ifstream cf(dir + "/convergence.csv");
  if (!cf) throw IoError("cannot open '" + dir + "/convergence.csv'");
  auto split = [](const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
      if (c == ',') {
        out.push_back(cur);
        cur.clear();
      } else {
        cur += c;
      }
    }
    out.push_back(cur);
    return out;
  };
  std::string line;
  if (!std::getline(cf, line)) throw IoError("empty convergence table in '" + dir + "'");
  run.header = split(line);
  while (std::getline(cf, line))
    if (!line.empty()) run.rows.push_back(split(line));
  return run;
}

// Error series for overlay charts: true error when recorded, eta_h otherwise,
// divided by |reference| when one is known (absolute values otherwise, e.g.
// for a QoI whose reference is exactly zero).
inline ChartSeries error_series(const LoadedRun& run, const std::string& color) {
  int cells = run.column("cells");
  int eta_h = run.column("eta_h");
  int true_err = run.column("true_error");
  double denom = run.reference_value && *run.reference_value != 0.0
                     ? std::abs(*run.reference_value)
                     : 1.0;
  bool used_estimate = false;
  ChartSeries s;
  s.color = color;
  for (const auto& row : run.rows) {
    auto n = run.value(row, cells);
    auto e = run.value(row, true_err);
    if (!e) {
      e = run.value(row, eta_h);
      used_estimate = true;
    }
    if (n && e) s.points.emplace_back(*n, *e / denom);
  }
  s.label = run.label + (used_estimate ? " (eta_h)" : " (true error)");
  return s;
}

inline void compare_checked(const std::string& dir_a, const std::string& dir_b,
                            const std::string& out_dir) {
  LoadedRun a = load_run(dir_a);
  LoadedRun b = load_run(dir_b);
  if (a.case_name != b.case_name || a.qoi != b.qoi)
    throw ConfigError("compare requires runs on the same case and QoI (got " + a.case_name +
                      "/" + a.qoi + " vs " + b.case_name + "/" + b.qoi + ")");
  if (a.label == b.label) {
    a.label += " (a)";
    b.label += " (b)";
  }
  make_dirs(out_dir);

  write_chart_svg(out_dir + "/compare_error.svg",
                  a.case_name + " " + a.qoi + ": error vs cells", "cells", "relative error",
                  true, true, {error_series(a, "#d62728"), error_series(b, "#1f77b4")});

  auto effectivity_series = [](const LoadedRun& run, const std::string& col,
                               const std::string& suffix, const std::string& color) {
    ChartSeries s{run.label + suffix, {}, color};
    int cells = run.column("cells");
    int eff = run.column(col);
    for (const auto& row : run.rows) {
      auto n = run.value(row, cells);
      auto e = run.value(row, eff);
      if (n && e) s.points.emplace_back(*n, *e);
    }
    return s;
  };
  write_chart_svg(out_dir + "/compare_effectivity.svg",
                  a.case_name + " " + a.qoi + ": effectivity vs cells", "cells",
                  "effectivity", true, false,
                  {effectivity_series(a, "effectivity_h", " eta_h", "#d62728"),
                   effectivity_series(a, "effectivity_sum", " sum eta_K", "#ff9f4a"),
                   effectivity_series(b, "effectivity_h", " eta_h", "#1f77b4"),
                   effectivity_series(b, "effectivity_sum", " sum eta_K", "#17becf")});

  // Combined long-form table. Source values are copied verbatim (they are
  // already full-precision), so comparing identical runs yields identical rows.
  std::ofstream os = open_out(out_dir + "/compare.csv");
  os << "run,iteration,cells,dofs,qoi_value,eta_h,sum_eta_k,marked,true_error,"
     << "effectivity_h,effectivity_sum,rel_error\n";
  for (const LoadedRun* run : {&a, &b}) {
    double denom = run->reference_value && *run->reference_value != 0.0
                       ? std::abs(*run->reference_value)
                       : 1.0;
    auto cell = [&](const std::vector<std::string>& row, const std::string& name) {
      int c = run->column(name);
      return c >= 0 && c < static_cast<int>(row.size()) ? row[c] : std::string();
    };
    for (const auto& row : run->rows) {
      auto err = run->value(row, run->column("true_error"));
      os << run->label << "," << cell(row, "iteration") << "," << cell(row, "cells") << ","
         << cell(row, "dofs") << "," << cell(row, "qoi_value") << "," << cell(row, "eta_h")
         << "," << cell(row, "sum_eta_k") << "," << cell(row, "marked") << ","
         << cell(row, "true_error") << "," << cell(row, "effectivity_h") << ","
         << cell(row, "effectivity_sum") << ","
         << (err ? fmt_g17(*err / denom) : std::string()) << "\n";
    }
  }
  if (!os) throw IoError("failed writing '" + out_dir + "/compare.csv'");
}

template <typename Fn>
inline int with_exit_codes(Fn&& fn) {
  try {
    fn();
    return 0;
  } catch (const SolverError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const MeshError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace detail

inline int run(const RunManifest& m) {
  return detail::with_exit_codes([&] { detail::run_checked(m); });
}

inline int compare(const std::string& dir_a, const std::string& dir_b,
                   const std::string& out_dir) {
  return detail::with_exit_codes([&] { detail::compare_checked(dir_a, dir_b, out_dir); });
}

}  // namespace goaladapt
