// Command-line front end: `run` drives one adaptive or uniform refinement
// study and writes its artifact tree; `compare` overlays two finished runs.
// Exit codes: 0 success, 2 configuration/mesh errors, 3 solver/internal
// failures, 4 I/O failures. GOALADAPT_THREADS caps worker threads.

#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "goaladapt/driver.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Goal-oriented adaptive FEM for plane-strain elasticity with active fiber"
               " pre-stress"};
  app.require_subcommand(1);

  goaladapt::RunManifest manifest;
  std::string case_id, config_path, qoi, mode = "adaptive";
  double tol = 0.0;

  CLI::App* run = app.add_subcommand("run", "Solve one case and write run artifacts");
  CLI::Option* case_opt =
      run->add_option("--case", case_id, "Built-in case id (manufactured, tongue, artery)");
  CLI::Option* config_opt = run->add_option("--config", config_path, "Case config file path");
  case_opt->excludes(config_opt);
  config_opt->excludes(case_opt);
  run->add_option("--qoi", qoi, "Quantity of interest (default: the case's own)")
      ->check(CLI::IsMember({"J1", "J2"}));
  run->add_option("--degree", manifest.degree, "Primal polynomial degree (dual adds one)")
      ->check(CLI::IsMember({1, 2}));
  run->add_option("--alpha", manifest.alpha, "Marking fraction in (0, 1]");
  CLI::Option* tol_opt =
      run->add_option("--tol", tol, "Stopping tolerance on eta_h (default: case preset)");
  run->add_option("--max-iters", manifest.max_iterations,
                  "Adaptive iteration cap; uniform mode reads this as the round count");
  run->add_option("--mode", mode, "Refinement strategy")
      ->check(CLI::IsMember({"adaptive", "uniform"}));
  run->add_option("--out", manifest.out_dir, "Output directory")->required();
  run->add_option("--reference-rounds", manifest.reference_rounds,
                  "Uniform rounds for the Richardson reference (0 = exact value when known)");
  run->add_option("--seed", manifest.seed, "Reserved; the pipeline is deterministic");

  std::string dir_a, dir_b, compare_out;
  CLI::App* compare = app.add_subcommand("compare", "Overlay two finished runs");
  compare->add_option("dir_a", dir_a, "First run directory")->required();
  compare->add_option("dir_b", dir_b, "Second run directory")->required();
  compare->add_option("--out", compare_out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (run->parsed()) {
    if (case_opt->count() == 0 && config_opt->count() == 0) {
      std::cerr << "error: exactly one of --case or --config is required\n";
      return 2;
    }
    manifest.from_config = config_opt->count() > 0;
    manifest.case_id = manifest.from_config ? config_path : case_id;
    if (!qoi.empty()) manifest.qoi = goaladapt::parse_qoi(qoi);
    if (tol_opt->count() > 0) manifest.tol = tol;
    manifest.mode =
        mode == "uniform" ? goaladapt::AdaptMode::uniform : goaladapt::AdaptMode::adaptive;
    return goaladapt::run(manifest);
  }
  return goaladapt::compare(dir_a, dir_b, compare_out);
}
