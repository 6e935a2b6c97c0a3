#pragma once
// The adaptive refinement loop and its uniform-refinement counterpart.
// Each iteration: primal solve, dual solve in the enriched space, global
// estimator, stop check against the tolerance (on the CURRENT mesh, before
// any refinement), local estimators, descending sort, Doerfler marking,
// conforming bisection, space rebuild. Loops rebuild everything from scratch
// each iteration; no solution transfer.

#include "goaladapt/dwr.hpp"

namespace goaladapt {

enum class AdaptMode { adaptive, uniform };

struct AdaptConfig {
  double alpha = 0.8;       // Doerfler fraction in (0, 1]
  double tol = 1e-6;        // stopping threshold for eta_h, QoI units
  int max_iterations = 12;  // >= 1
  AdaptMode mode = AdaptMode::adaptive;
  int degree = 1;           // primal degree; the dual uses degree + 1
};

inline void validate_config(const AdaptConfig& cfg) {
  if (!(cfg.alpha > 0.0 && cfg.alpha <= 1.0))
    throw ConfigError("marking fraction must satisfy 0 < alpha <= 1, got " + fmt_g17(cfg.alpha));
  if (!(cfg.tol > 0.0))
    throw ConfigError("stopping tolerance must be positive, got " + fmt_g17(cfg.tol));
  if (cfg.max_iterations < 1) throw ConfigError("max_iterations must be at least 1");
  if (cfg.degree < 1 || cfg.degree > 2)
    throw ConfigError("primal degree must be 1 or 2 (the dual solve needs degree + 1)");
}

// Doerfler marking: sort cells by decreasing eta (ties by ascending id),
// return the minimal prefix whose sum reaches alpha times the total, as an
// ascending list of cell ids. The total is accumulated in the same descending
// order as the prefix sums, so alpha = 1 always terminates exactly at the
// last positive entry. All-zero input marks nothing.
inline std::vector<int> dorfler_mark(const std::vector<double>& eta, double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0))
    throw ConfigError("marking fraction must satisfy 0 < alpha <= 1, got " + fmt_g17(alpha));
  for (double e : eta)
    if (!(e >= 0.0)) throw Error("cell estimators must be nonnegative");

  std::vector<int> order(eta.size());
  for (size_t i = 0; i < eta.size(); ++i) order[i] = static_cast<int>(i);
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return eta[a] != eta[b] ? eta[a] > eta[b] : a < b; });

  double total = 0.0;
  for (int id : order) total += eta[id];
  if (total == 0.0) return {};

  const double target = alpha * total;
  std::vector<int> marked;
  double prefix = 0.0;
  for (int id : order) {
    marked.push_back(id);
    prefix += eta[id];
    if (prefix >= target) break;
  }
  std::sort(marked.begin(), marked.end());
  return marked;
}

struct IterationRecord {
  int iteration = 0;
  int cell_count = 0;
  int dof_count = 0;
  double qoi_value = 0.0;
  double eta_h = 0.0;
  double sum_eta_k = 0.0;
  std::optional<double> true_error;  // |reference - qoi| when a reference is given
  std::optional<double> effectivity_h;
  std::optional<double> effectivity_sum;
  int marked_count = 0;  // 0 on the iteration that met the tolerance
};

enum class LoopStatus { tol_reached, max_iter, error };

inline const char* loop_status_name(LoopStatus s) {
  switch (s) {
    case LoopStatus::tol_reached: return "tol_reached";
    case LoopStatus::max_iter: return "max_iter";
    default: return "error";
  }
}

struct ConvergenceRecord {
  std::vector<IterationRecord> iterations;
  LoopStatus status = LoopStatus::error;
};

// Fine-mesh reference QoI with a Richardson-style uncertainty from the last
// two uniform rounds. Primal solves only; rounds counts uniform refinements
// of the given mesh and must be >= 2 so the finest pair exists.
struct ReferenceQoi {
  double value = 0.0;
  double uncertainty = 0.0;
  int rounds = 0;
  int cells = 0;
};

inline ReferenceQoi reference_qoi(const TriMesh& initial, const CaseData& initial_cs,
                                  const QoISpec& q, int degree, int rounds,
                                  int max_cells = 2000000) {
  if (rounds < 2) throw ConfigError("reference computation needs at least 2 uniform rounds");
  TriMesh mesh = initial;
  CaseData cs = initial_cs;
  QuadratureSet rules = rules_for_degree(degree);
  double j_prev = 0.0, j_last = 0.0;
  for (int r = 0; r <= rounds; ++r) {
    if (r > 0) {
      if (4 * mesh.cell_count() > max_cells)
        throw Error("reference mesh would exceed the cell budget");
      RefineResult res = refine_uniform(mesh);
      cs.activation = remap_fibers(cs.activation, res.parent);
      mesh = std::move(res.mesh);
    }
    if (r < rounds - 1) continue;  // only the finest pair is solved
    FunctionSpace space = build_space(mesh, degree);
    EdgeTopology topo = build_edge_topology(mesh);
    SparseMat a = assemble_stiffness(space, cs.materials, rules.cell);
    Eigen::VectorXd b = assemble_load(space, topo, cs, rules);
    FeField u = solve_system(a, b, space);
    j_prev = j_last;
    j_last = qoi_value(q, u, rules.cell);
  }
  ReferenceQoi ref;
  ref.value = j_last;
  ref.uncertainty = std::abs(j_last - j_prev);
  ref.rounds = rounds;
  ref.cells = mesh.cell_count();
  return ref;
}

// Per-iteration hook for exporters and tests. Called after the iteration's
// record is final, before any refinement; `marked` is empty once the
// tolerance is met. `cs` is the case data for THIS mesh generation (fiber
// directions are remapped between iterations).
using LoopObserver = std::function<void(int iteration, const TriMesh& mesh, const CaseData& cs,
                                        const IterationSolution& it, const EstimateReport& rep,
                                        const std::vector<int>& marked)>;

namespace detail {

// Effectivities are only honest when the reference is well separated from
// the measured error; below 10x the Richardson uncertainty they are refused.
inline EstimateReport gated_report(const IterationSolution& it, int cell_count,
                                   const std::optional<ReferenceQoi>& reference) {
  EstimateReport rep = make_report(
      it.global.eta_h, it.locals, it.qoi, it.space->dof_count(), cell_count,
      reference ? std::optional<double>(reference->value) : std::nullopt);
  if (reference && rep.true_error && *rep.true_error < 10.0 * reference->uncertainty) {
    rep.effectivity_h.reset();
    rep.effectivity_sum.reset();
  }
  return rep;
}

inline IterationRecord to_record(int iteration, const EstimateReport& rep, int marked_count) {
  IterationRecord r;
  r.iteration = iteration;
  r.cell_count = rep.cell_count;
  r.dof_count = rep.dof_count;
  r.qoi_value = rep.qoi_value;
  r.eta_h = rep.eta_h;
  r.sum_eta_k = rep.sum_eta_k;
  r.true_error = rep.true_error;
  r.effectivity_h = rep.effectivity_h;
  r.effectivity_sum = rep.effectivity_sum;
  r.marked_count = marked_count;
  return r;
}

}  // namespace detail

inline ConvergenceRecord adaptive_loop(const TriMesh& initial, const CaseData& initial_cs,
                                       const QoISpec& q, const AdaptConfig& cfg,
                                       const std::optional<ReferenceQoi>& reference = {},
                                       const LoopObserver& observer = {}) {
  validate_config(cfg);
  TriMesh mesh = initial;
  CaseData cs = initial_cs;
  QuadratureSet rules = rules_for_degree(cfg.degree);
  ConvergenceRecord rec;
  rec.status = LoopStatus::max_iter;
  for (int iter = 0; iter < cfg.max_iterations; ++iter) {
    IterationSolution it = solve_and_estimate(mesh, cs, q, cfg.degree, rules);
    EstimateReport rep = detail::gated_report(it, mesh.cell_count(), reference);

    if (it.global.eta_h <= cfg.tol) {
      rec.iterations.push_back(detail::to_record(iter, rep, 0));
      if (observer) observer(iter, mesh, cs, it, rep, {});
      rec.status = LoopStatus::tol_reached;
      break;
    }

    std::vector<int> marked = dorfler_mark(it.locals.eta, cfg.alpha);
    rec.iterations.push_back(detail::to_record(iter, rep, static_cast<int>(marked.size())));
    if (observer) observer(iter, mesh, cs, it, rep, marked);
    if (iter + 1 == cfg.max_iterations) break;  // cap reached; refining would be discarded

    RefineResult res = refine(mesh, marked);
    cs.activation = remap_fibers(cs.activation, res.parent);
    mesh = std::move(res.mesh);
  }
  return rec;
}

// Uniform comparison loop: rounds refinements, rounds + 1 records, the same
// estimator machinery per mesh so effectivity series exist for both loops.
// Runs its full schedule, hence status max_iter.
inline ConvergenceRecord uniform_loop(const TriMesh& initial, const CaseData& initial_cs,
                                      const QoISpec& q, int degree, int rounds,
                                      const std::optional<ReferenceQoi>& reference = {},
                                      const LoopObserver& observer = {}) {
  AdaptConfig probe;
  probe.degree = degree;
  validate_config(probe);
  if (rounds < 0) throw ConfigError("uniform rounds must be nonnegative");
  TriMesh mesh = initial;
  CaseData cs = initial_cs;
  QuadratureSet rules = rules_for_degree(degree);
  ConvergenceRecord rec;
  rec.status = LoopStatus::max_iter;
  for (int r = 0; r <= rounds; ++r) {
    IterationSolution it = solve_and_estimate(mesh, cs, q, degree, rules);
    EstimateReport rep = detail::gated_report(it, mesh.cell_count(), reference);
    rec.iterations.push_back(detail::to_record(r, rep, 0));
    if (observer) observer(r, mesh, cs, it, rep, {});
    if (r == rounds) break;
    RefineResult res = refine_uniform(mesh);
    cs.activation = remap_fibers(cs.activation, res.parent);
    mesh = std::move(res.mesh);
  }
  return rec;
}

}  // namespace goaladapt
