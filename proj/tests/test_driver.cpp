#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include "goaladapt/driver.hpp"
#include "goaladapt/mesh_io.hpp"

using namespace goaladapt;
namespace fs = std::filesystem;

namespace {

// Fresh scratch directory per test; ctest runs one binary's cases serially.
std::string scratch(const std::string& slug) {
  fs::path dir = fs::path("test_out") / "driver" / slug;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir.string();
}

std::string slurp(const std::string& path) {
  std::ifstream is(path);
  REQUIRE(is);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

std::vector<std::vector<std::string>> read_csv(const std::string& path) {
  std::ifstream is(path);
  REQUIRE(is);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> row;
    std::string cur;
    for (char c : line) {
      if (c == ',') {
        row.push_back(cur);
        cur.clear();
      } else {
        cur += c;
      }
    }
    row.push_back(cur);
    rows.push_back(row);
  }
  return rows;
}

int column(const std::vector<std::string>& header, const std::string& name) {
  for (size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return static_cast<int>(i);
  return -1;
}

RunManifest quick_manufactured(const std::string& out) {
  RunManifest m;
  m.case_id = "manufactured";
  m.degree = 2;
  m.tol = 1e-6;
  m.out_dir = out;
  return m;
}

int run_cli(const std::string& args, const std::string& stderr_file) {
  std::string cmd = std::string(GOALADAPT_CLI_PATH) + " " + args + " 2>" + stderr_file;
  int raw = std::system(cmd.c_str());
  REQUIRE(raw != -1);
  return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
}

}  // namespace

TEST_CASE("adaptive run writes the full artifact tree") {
  std::string out = scratch("tree");
  REQUIRE(run(quick_manufactured(out)) == 0);

  for (const char* f : {"manifest.ini", "convergence.csv", "summary.txt", "error.svg"})
    CHECK(fs::exists(fs::path(out) / f));
  for (const char* f : {"mesh.txt", "fields.vtk", "estimators.csv", "coeffs.csv"})
    CHECK(fs::exists(fs::path(out) / "iter_000" / f));

  auto rows = read_csv(out + "/convergence.csv");
  REQUIRE(rows.size() >= 3);  // header + at least two iterations to the preset tol
  const auto& h = rows[0];
  for (const char* name : {"iteration", "cells", "dofs", "qoi_value", "eta_h", "sum_eta_k",
                           "marked", "true_error", "effectivity_h", "effectivity_sum"})
    CHECK(column(h, name) >= 0);

  // Per-row invariant: the global estimate never exceeds the local sum, and
  // the exact-reference case always carries the error columns.
  int c_eta = column(h, "eta_h"), c_sum = column(h, "sum_eta_k"), c_err = column(h, "true_error");
  for (size_t i = 1; i < rows.size(); ++i) {
    CHECK(std::stod(rows[i][c_eta]) <= std::stod(rows[i][c_sum]) * (1.0 + 1e-12));
    CHECK(!rows[i][c_err].empty());
  }

  // Last iteration dir matches the last CSV row.
  int last_iter = static_cast<int>(rows.size()) - 2;
  char buf[32];
  std::snprintf(buf, sizeof buf, "iter_%03d", last_iter);
  CHECK(fs::exists(fs::path(out) / buf));
  std::snprintf(buf, sizeof buf, "iter_%03d", last_iter + 1);
  CHECK(!fs::exists(fs::path(out) / buf));

  std::string manifest = slurp(out + "/manifest.ini");
  CHECK(manifest.find("status = tol_reached") != std::string::npos);
  CHECK(manifest.find("reference = exact") != std::string::npos);
  CHECK(manifest.find("case = manufactured") != std::string::npos);

  std::string summary = slurp(out + "/summary.txt");
  CHECK(summary.find("tol_reached") != std::string::npos);
  CHECK(summary.find("small-strain check") != std::string::npos);

  std::string svg = slurp(out + "/error.svg");
  CHECK(svg.find("<svg") != std::string::npos);
  CHECK(svg.find("polyline") != std::string::npos);
  CHECK(svg.find("true error") != std::string::npos);
}

TEST_CASE("iteration artifacts agree across files") {
  std::string out = scratch("consistency");
  REQUIRE(run(quick_manufactured(out)) == 0);

  TriMesh mesh = load_trimesh(out + "/iter_000/mesh.txt");
  CHECK(mesh.cell_count() == 32);

  auto est = read_csv(out + "/iter_000/estimators.csv");
  REQUIRE(est.size() == static_cast<size_t>(mesh.cell_count()) + 1);
  int c_eta = column(est[0], "eta_k"), c_area = column(est[0], "area");
  double sum_eta = 0.0, sum_area = 0.0;
  for (size_t i = 1; i < est.size(); ++i) {
    double eta = std::stod(est[i][c_eta]);
    CHECK(eta >= 0.0);
    sum_eta += eta;
    sum_area += std::stod(est[i][c_area]);
  }
  CHECK(std::abs(sum_area - 1.0) <= 1e-12);  // unit square

  // Cross-file: estimator sum equals the convergence row.
  auto conv = read_csv(out + "/convergence.csv");
  double sum_col = std::stod(conv[1][column(conv[0], "sum_eta_k")]);
  CHECK(std::abs(sum_eta - sum_col) <= 1e-12 * sum_col);

  std::string vtk = slurp(out + "/iter_000/fields.vtk");
  CHECK(vtk.rfind("# vtk DataFile Version 3.0\n", 0) == 0);
  std::ostringstream points;
  points << "POINTS " << mesh.vertex_count() << " double";
  CHECK(vtk.find(points.str()) != std::string::npos);
  std::ostringstream cells;
  cells << "CELLS " << mesh.cell_count() << " " << 4 * mesh.cell_count();
  CHECK(vtk.find(cells.str()) != std::string::npos);
  for (const char* block : {"VECTORS displacement double", "SCALARS eta_k double 1",
                            "SCALARS sigma_a_magnitude double 1", "SCALARS region int 1",
                            "TENSORS sigma_a double"})
    CHECK(vtk.find(block) != std::string::npos);

  auto coeffs = read_csv(out + "/iter_000/coeffs.csv");
  CHECK(coeffs.size() >= static_cast<size_t>(mesh.vertex_count()) + 1);
}

TEST_CASE("reruns are byte-identical") {
  std::string a = scratch("rerun_a"), b = scratch("rerun_b");
  REQUIRE(run(quick_manufactured(a)) == 0);
  REQUIRE(run(quick_manufactured(b)) == 0);
  CHECK(slurp(a + "/convergence.csv") == slurp(b + "/convergence.csv"));
  CHECK(slurp(a + "/iter_002/estimators.csv") == slurp(b + "/iter_002/estimators.csv"));
  CHECK(slurp(a + "/iter_002/coeffs.csv") == slurp(b + "/iter_002/coeffs.csv"));
  CHECK(slurp(a + "/iter_002/fields.vtk") == slurp(b + "/iter_002/fields.vtk"));
  CHECK(slurp(a + "/error.svg") == slurp(b + "/error.svg"));
}

TEST_CASE("huge tolerance stops after the first iteration") {
  std::string out = scratch("tol_huge");
  RunManifest m = quick_manufactured(out);
  m.tol = 1e30;
  REQUIRE(run(m) == 0);
  auto rows = read_csv(out + "/convergence.csv");
  CHECK(rows.size() == 2);  // header + iteration 0
  CHECK(rows[1][column(rows[0], "marked")] == "0");
  CHECK(fs::exists(fs::path(out) / "iter_000"));
  CHECK(!fs::exists(fs::path(out) / "iter_001"));
  CHECK(slurp(out + "/manifest.ini").find("status = tol_reached") != std::string::npos);
}

TEST_CASE("uniform mode records every round") {
  std::string out = scratch("uniform");
  RunManifest m = quick_manufactured(out);
  m.mode = AdaptMode::uniform;
  m.max_iterations = 2;
  m.tol.reset();
  REQUIRE(run(m) == 0);
  auto rows = read_csv(out + "/convergence.csv");
  REQUIRE(rows.size() == 4);  // header + rounds 0..2
  int c_cells = column(rows[0], "cells");
  CHECK(rows[1][c_cells] == "32");
  CHECK(rows[2][c_cells] == "128");
  CHECK(rows[3][c_cells] == "512");
  CHECK(slurp(out + "/manifest.ini").find("mode = uniform") != std::string::npos);
}

TEST_CASE("error paths map to documented exit codes") {
  RunManifest unknown = quick_manufactured(scratch("exit_unknown"));
  unknown.case_id = "femur";
  CHECK(run(unknown) == 2);

  RunManifest missing = quick_manufactured(scratch("exit_missing"));
  missing.case_id = "test_out/driver/does_not_exist.ini";
  missing.from_config = true;
  CHECK(run(missing) == 4);

  RunManifest degree = quick_manufactured(scratch("exit_degree"));
  degree.degree = 3;
  CHECK(run(degree) == 2);

  RunManifest one_round = quick_manufactured(scratch("exit_refrounds"));
  one_round.reference_rounds = 1;
  CHECK(run(one_round) == 2);

  RunManifest budget = quick_manufactured(scratch("exit_budget"));
  budget.mode = AdaptMode::uniform;
  budget.max_iterations = 12;  // 32 * 4^12 cells blows the 2e6 budget
  CHECK(run(budget) == 2);

  RunManifest no_out = quick_manufactured("");
  CHECK(run(no_out) == 2);
}

TEST_CASE("richardson reference flows into the report") {
  std::string out = scratch("richardson");
  RunManifest m = quick_manufactured(out);
  m.degree = 1;
  m.tol = 1e-4;
  m.max_iterations = 4;
  m.reference_rounds = 3;
  REQUIRE(run(m) == 0);
  std::string manifest = slurp(out + "/manifest.ini");
  CHECK(manifest.find("reference = richardson") != std::string::npos);
  CHECK(manifest.find("reference_solve_rounds = 3") != std::string::npos);
  CHECK(manifest.find("reference_cells = 2048") != std::string::npos);

  // The extrapolated value must be close to the closed form.
  std::istringstream is(manifest);
  detail::IniFile ini = detail::parse_ini(is, "manifest");
  detail::Section report(ini, "report", true);
  double ref = detail::parse_double(report.require("reference_value"), "reference_value");
  double unc = detail::parse_double(report.require("reference_uncertainty"), "reference_value");
  double exact = 2.0 / (M_PI * M_PI) + 121.0 / 9216.0;
  CHECK(std::abs(ref - exact) <= 10.0 * unc + 1e-10);
}

TEST_CASE("compare overlays two finished runs") {
  std::string a = scratch("cmp_a"), b = scratch("cmp_b"), out = scratch("cmp_out");
  REQUIRE(run(quick_manufactured(a)) == 0);
  RunManifest mu = quick_manufactured(b);
  mu.mode = AdaptMode::uniform;
  mu.max_iterations = 2;
  mu.tol.reset();
  REQUIRE(run(mu) == 0);

  REQUIRE(compare(a, b, out) == 0);
  for (const char* f : {"compare.csv", "compare_error.svg", "compare_effectivity.svg"})
    CHECK(fs::exists(fs::path(out) / f));

  auto rows = read_csv(out + "/compare.csv");
  int c_run = column(rows[0], "run"), c_rel = column(rows[0], "rel_error");
  size_t n_a = 0, n_b = 0;
  for (size_t i = 1; i < rows.size(); ++i) {
    if (rows[i][c_run] == "cmp_a") ++n_a;
    if (rows[i][c_run] == "cmp_b") ++n_b;
    CHECK(!rows[i][c_rel].empty());
  }
  CHECK(n_a >= 2);
  CHECK(n_b == 3);
  CHECK(n_a + n_b == rows.size() - 1);

  std::string svg = slurp(out + "/compare_error.svg");
  CHECK(svg.find("cmp_a (true error)") != std::string::npos);
  CHECK(svg.find("cmp_b (true error)") != std::string::npos);
}

TEST_CASE("comparing a run with itself overlays identical series") {
  std::string a = scratch("self_a"), out = scratch("self_out");
  REQUIRE(run(quick_manufactured(a)) == 0);
  REQUIRE(compare(a, a, out) == 0);
  auto rows = read_csv(out + "/compare.csv");
  REQUIRE(rows.size() % 2 == 1);
  size_t half = (rows.size() - 1) / 2;
  for (size_t i = 0; i < half; ++i) {
    std::vector<std::string> lhs(rows[1 + i].begin() + 1, rows[1 + i].end());
    std::vector<std::string> rhs(rows[1 + half + i].begin() + 1, rows[1 + half + i].end());
    CHECK(lhs == rhs);  // identical except the run label
  }
  CHECK(rows[1][0] != rows[1 + half][0]);
}

TEST_CASE("compare rejects mismatched runs") {
  std::string a = scratch("mis_a"), b = scratch("mis_b");
  REQUIRE(run(quick_manufactured(a)) == 0);
  RunManifest m2 = quick_manufactured(b);
  m2.qoi = QoiVariant::J2;
  m2.tol = 1e30;
  REQUIRE(run(m2) == 0);
  CHECK(compare(a, b, scratch("mis_out")) == 2);
  CHECK(compare(a, "test_out/driver/no_such_run", scratch("mis_out2")) == 4);
}

TEST_CASE("command line maps flags and exit codes") {
  std::string dir = scratch("cli");
  std::string err = dir + "/stderr.txt";

  int code = run_cli("run --case manufactured --qoi J1 --degree 2 --alpha 0.8 --tol 1e-6"
                     " --mode adaptive --out " + dir + "/ok",
                     err);
  CHECK(code == 0);
  CHECK(fs::exists(fs::path(dir) / "ok" / "convergence.csv"));

  code = run_cli("run --case femur --out " + dir + "/unknown", err);
  CHECK(code == 2);
  CHECK(slurp(err).find("unknown case 'femur'") != std::string::npos);

  code = run_cli("run --case manufactured --config x.ini --out " + dir + "/both", err);
  CHECK(code == 2);

  code = run_cli("run --case manufactured --degree 7 --out " + dir + "/deg", err);
  CHECK(code == 2);

  code = run_cli("run --out " + dir + "/neither", err);
  CHECK(code == 2);
  CHECK(slurp(err).find("--case or --config") != std::string::npos);

  code = run_cli("compare " + dir + "/ok " + dir + "/ok --out " + dir + "/cmp", err);
  CHECK(code == 0);
  CHECK(fs::exists(fs::path(dir) / "cmp" / "compare.csv"));
}
