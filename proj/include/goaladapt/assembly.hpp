#pragma once
// Assembly of the plane-strain elasticity system, activation loads, QoI
// functionals, Dirichlet elimination and the sparse direct solve.
//
// Bilinear form: a(v,w) = int sigma(v):eps(w) with sigma = 2*mu*eps +
// lambda*tr(eps)*I. In index form the element kernel is
//   K[(a,c),(b,d)] = int mu*(delta_cd grad(pa).grad(pb) + d_d(pa) d_c(pb))
//                        + lambda * d_c(pa) d_d(pb)
// for scalar shape functions pa, pb and displacement components c, d.
//
// One quadrature rule pair is shared by every integral of a run (primal,
// dual, QoI, residuals) so that linearity identities between differently
// assembled quantities hold to roundoff, not merely to quadrature error.

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <functional>
#include <optional>

#include "goaladapt/material.hpp"
#include "goaladapt/quadrature.hpp"
#include "goaladapt/space.hpp"

namespace goaladapt {

using SparseMat = Eigen::SparseMatrix<double>;
using BodyForce = std::function<Vec2(const Vec2&)>;            // f(x), MPa/mm
using Traction = std::function<Vec2(const Vec2&, const Vec2&)>;  // F(x, n), MPa

// Rules sized for a primal degree k: cell integrands up to 2k+4 and edge
// integrands up to 2k+3 are exact, which covers every polynomial integral
// appearing in the primal/dual systems and the residual identities.
struct QuadratureSet {
  std::vector<TriPoint> cell;
  std::vector<LinePoint> edge;
};

inline QuadratureSet rules_for_degree(int primal_degree) {
  return {triangle_rule(2 * primal_degree + 4), edge_rule(2 * primal_degree + 3)};
}

// Reference basis tables at the cell-rule points, computed once per space.
struct CellTables {
  std::vector<Eigen::VectorXd> values;
  std::vector<Eigen::MatrixX2d> grads;
  CellTables(const ReferenceBasis& basis, const std::vector<TriPoint>& rule) {
    values.reserve(rule.size());
    grads.reserve(rule.size());
    for (const auto& qp : rule) {
      values.push_back(basis.values(Vec2(qp.x, qp.y)));
      grads.push_back(basis.gradients(Vec2(qp.x, qp.y)));
    }
  }
};

inline Eigen::MatrixXd element_stiffness(const FunctionSpace& space, const CellTables& tables,
                                         const std::vector<TriPoint>& rule, int cell,
                                         double lambda, double mu) {
  const int n = space.nodes_per_cell();
  Eigen::MatrixXd k = Eigen::MatrixXd::Zero(2 * n, 2 * n);
  Mat2 jac = space.mesh().jacobian(cell);
  Mat2 jinv = jac.inverse();
  double detj = jac.determinant();
  for (size_t q = 0; q < rule.size(); ++q) {
    double w = rule[q].w * detj;
    Eigen::MatrixX2d g = tables.grads[q] * jinv;  // rows: physical gradients
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) {
        double dot = g.row(a).dot(g.row(b));
        for (int c = 0; c < 2; ++c)
          for (int d = 0; d < 2; ++d)
            k(2 * a + c, 2 * b + d) +=
                w * (mu * ((c == d ? dot : 0.0) + g(a, d) * g(b, c)) + lambda * g(a, c) * g(b, d));
      }
  }
  return k;
}

inline SparseMat assemble_stiffness(const FunctionSpace& space, const MaterialField& mat,
                                    const std::vector<TriPoint>& cell_rule) {
  mat.require_covers(space.mesh());
  const TriMesh& mesh = space.mesh();
  const int n = space.nodes_per_cell();
  CellTables tables(space.basis(), cell_rule);

  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<size_t>(mesh.cell_count()) * (2 * n) * (2 * n));
  const int block = 4096;
  std::vector<Eigen::MatrixXd> local(std::min(block, mesh.cell_count()));
  for (int start = 0; start < mesh.cell_count(); start += block) {
    int count = std::min(block, mesh.cell_count() - start);
    parallel_for(count, [&](int i) {
      int c = start + i;
      const Material& m = mat.at_region(mesh.flags(c).region);
      local[i] = element_stiffness(space, tables, cell_rule, c, m.lambda(), m.mu());
    });
    for (int i = 0; i < count; ++i) {  // sequential scatter: deterministic
      int c = start + i;
      for (int a = 0; a < n; ++a)
        for (int ca = 0; ca < 2; ++ca)
          for (int b = 0; b < n; ++b)
            for (int cb = 0; cb < 2; ++cb)
              triplets.emplace_back(space.cell_dof(c, a, ca), space.cell_dof(c, b, cb),
                                    local[i](2 * a + ca, 2 * b + cb));
    }
  }
  SparseMat a(space.dof_count(), space.dof_count());
  a.setFromTriplets(triplets.begin(), triplets.end());
  return a;
}

inline SparseMat assemble_stiffness(const FunctionSpace& space, const MaterialField& mat) {
  return assemble_stiffness(space, mat, rules_for_degree(space.degree()).cell);
}

// Load vector: body force + Neumann tractions + active fiber pre-stress
//   l_A(w) = -beta*T int_{omega_A} (eps(w) e_A).e_A dx,
// whose entry for shape function p and component c is
//   -beta*T * e_A[c] * (e_A . grad p) integrated over the cell.
inline Eigen::VectorXd assemble_load(const FunctionSpace& space, const EdgeTopology& topo,
                                     const BodyForce& f, const Traction& traction,
                                     const ActivationSpec& act,
                                     const std::vector<TriPoint>& cell_rule,
                                     const std::vector<LinePoint>& edge_rule_pts) {
  const TriMesh& mesh = space.mesh();
  const int n = space.nodes_per_cell();
  Eigen::VectorXd b = Eigen::VectorXd::Zero(space.dof_count());
  CellTables tables(space.basis(), cell_rule);

  if (f) {
    for (int c = 0; c < mesh.cell_count(); ++c) {
      double detj = 2.0 * mesh.cell_area(c);
      for (size_t q = 0; q < cell_rule.size(); ++q) {
        Vec2 x = mesh.map_to_physical(c, Vec2(cell_rule[q].x, cell_rule[q].y));
        Vec2 fx = f(x);
        double w = cell_rule[q].w * detj;
        for (int l = 0; l < n; ++l) {
          b[space.cell_dof(c, l, 0)] += w * fx.x() * tables.values[q][l];
          b[space.cell_dof(c, l, 1)] += w * fx.y() * tables.values[q][l];
        }
      }
    }
  }

  // Active pre-stress. Skipped entirely when beta*T == 0 so that a run with
  // beta = 0 produces bitwise the same vector as one with no activation.
  if (act.stress_scale() != 0.0) {
    validate_activation(act, mesh);
    const double scale = act.stress_scale();
    for (int c = 0; c < mesh.cell_count(); ++c) {
      if (!mesh.flags(c).in_omega_a) continue;
      const Vec2 e = act.fiber[c];
      Mat2 jinv = mesh.jacobian(c).inverse();
      double detj = 2.0 * mesh.cell_area(c);
      for (size_t q = 0; q < cell_rule.size(); ++q) {
        double w = cell_rule[q].w * detj;
        Eigen::MatrixX2d g = tables.grads[q] * jinv;
        for (int l = 0; l < n; ++l) {
          double along = e.x() * g(l, 0) + e.y() * g(l, 1);  // e_A . grad p
          b[space.cell_dof(c, l, 0)] -= w * scale * e.x() * along;
          b[space.cell_dof(c, l, 1)] -= w * scale * e.y() * along;
        }
      }
    }
  }

  if (traction) {
    for (const auto& edge : topo.neumann_edges) {
      Vec2 pa = mesh.vertex(edge.va), pb = mesh.vertex(edge.vb);
      int orient = edge_orientation(mesh, edge.cell, edge.local, edge.va);
      for (const auto& qp : edge_rule_pts) {
        Vec2 x = pa + qp.t * (pb - pa);
        Vec2 fx = traction(x, edge.normal);
        Eigen::VectorXd phi = space.basis().values(edge_ref_point(edge.local, orient, qp.t));
        double w = qp.w * edge.length;
        for (int l = 0; l < n; ++l) {
          b[space.cell_dof(edge.cell, l, 0)] += w * fx.x() * phi[l];
          b[space.cell_dof(edge.cell, l, 1)] += w * fx.y() * phi[l];
        }
      }
    }
  }
  return b;
}

// Everything the assembly and estimation layers need to know about a problem,
// minus the mesh (which travels separately because refinement replaces it).
// activation.fiber is indexed by the cells of whichever mesh is current.
struct CaseData {
  MaterialField materials;
  BodyForce body_force;  // empty means zero
  Traction traction;     // empty means zero
  ActivationSpec activation;
};

inline Eigen::VectorXd assemble_load(const FunctionSpace& space, const EdgeTopology& topo,
                                     const CaseData& cs, const QuadratureSet& rules) {
  return assemble_load(space, topo, cs.body_force, cs.traction, cs.activation, rules.cell,
                       rules.edge);
}

// ---------------------------------------------------------------------------
// Linear solve with symmetric Dirichlet elimination (u_D = 0, so eliminated
// columns contribute nothing to the right-hand side).

struct SolveInfo {
  double rel_residual = 0.0;
  int free_dofs = 0;
  int constrained_dofs = 0;
};

inline double inf_norm(const SparseMat& a) {
  Eigen::VectorXd rowsum = Eigen::VectorXd::Zero(a.rows());
  for (int k = 0; k < a.outerSize(); ++k)
    for (SparseMat::InnerIterator it(a, k); it; ++it) rowsum[it.row()] += std::abs(it.value());
  return rowsum.size() ? rowsum.maxCoeff() : 0.0;
}

inline FeField solve_system(const SparseMat& a, const Eigen::VectorXd& b,
                            const FunctionSpace& space, SolveInfo* info = nullptr) {
  const auto& constrained = space.dirichlet_dofs();
  if (constrained.empty())
    throw SolverError("no Dirichlet constraints: the elasticity system is singular");
  std::vector<int> to_reduced(space.dof_count(), -1);
  {
    size_t ci = 0;
    int next = 0;
    for (int dof = 0; dof < space.dof_count(); ++dof) {
      if (ci < constrained.size() && constrained[ci] == dof) {
        ++ci;
        continue;
      }
      to_reduced[dof] = next++;
    }
  }
  const int nred = space.dof_count() - static_cast<int>(constrained.size());

  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(a.nonZeros());
  for (int k = 0; k < a.outerSize(); ++k)
    for (SparseMat::InnerIterator it(a, k); it; ++it) {
      int r = to_reduced[it.row()], c = to_reduced[it.col()];
      if (r >= 0 && c >= 0) triplets.emplace_back(r, c, it.value());
    }
  SparseMat ared(nred, nred);
  ared.setFromTriplets(triplets.begin(), triplets.end());
  Eigen::VectorXd bred(nred);
  for (int dof = 0; dof < space.dof_count(); ++dof)
    if (to_reduced[dof] >= 0) bred[to_reduced[dof]] = b[dof];

  Eigen::SimplicialLDLT<SparseMat> ldlt(ared);
  if (ldlt.info() != Eigen::Success)
    throw SolverError("sparse factorization failed (singular reduced system)");
  Eigen::VectorXd x = ldlt.solve(bred);
  // One step of iterative refinement keeps the enforced tolerance honest.
  Eigen::VectorXd resid = bred - ared * x;
  x += ldlt.solve(resid);
  resid = bred - ared * x;

  double scale = std::max(bred.size() ? bred.lpNorm<Eigen::Infinity>() : 0.0,
                          inf_norm(ared) * (x.size() ? x.lpNorm<Eigen::Infinity>() : 0.0));
  double rel = scale > 0 ? resid.lpNorm<Eigen::Infinity>() / scale : 0.0;
  if (rel > 1e-12)
    throw SolverError("solver residual " + fmt_g17(rel) + " exceeds the 1e-12 tolerance");
  if (info) *info = {rel, nred, static_cast<int>(constrained.size())};

  FeField u(space);
  for (int dof = 0; dof < space.dof_count(); ++dof)
    if (to_reduced[dof] >= 0) u.coeffs[dof] = x[to_reduced[dof]];
  return u;
}

// Relative weak residual |b - A u| at selected free DOFs, scaled the way the
// Galerkin-orthogonality gate expects.
inline double galerkin_residual(const SparseMat& a, const Eigen::VectorXd& b, const FeField& u,
                                const std::vector<int>& dofs) {
  Eigen::VectorXd r = b - a * u.coeffs;
  double scale = inf_norm(a) * u.coeffs.lpNorm<Eigen::Infinity>() + b.lpNorm<Eigen::Infinity>();
  if (scale == 0.0) return 0.0;
  double worst = 0.0;
  for (int dof : dofs) worst = std::max(worst, std::abs(r[dof]));
  return worst / scale;
}

// ---------------------------------------------------------------------------
// Stress and QoIs

inline Mat2 strain(const Mat2& grad) { return 0.5 * (grad + grad.transpose()); }

inline Mat2 hooke_stress(const Mat2& eps, const Material& m) {
  return 2.0 * m.mu() * eps + m.lambda() * eps.trace() * Mat2::Identity();
}

// Full stress including the active part: sigma_A = sigma(u) + beta*T
// (e_A x e_A) on active cells.
inline Mat2 stress(const FeField& u, const MaterialField& mat, const ActivationSpec& act, int cell,
                   const Vec2& point) {
  const TriMesh& mesh = u.space->mesh();
  if (!mesh.contains(cell, point, 1e-9)) throw Error("stress query point lies outside the cell");
  Mat2 eps = strain(eval_gradient(u, cell, mesh.map_to_reference(cell, point)));
  Mat2 s = hooke_stress(eps, mat.at_region(mesh.flags(cell).region));
  if (mesh.flags(cell).in_omega_a && act.stress_scale() != 0.0)
    s += act.stress_scale() * act.fiber[cell] * act.fiber[cell].transpose();
  return s;
}

inline double qoi_value(const QoISpec& q, const FeField& u,
                        const std::vector<TriPoint>& cell_rule) {
  const FunctionSpace& space = *u.space;
  const TriMesh& mesh = space.mesh();
  CellTables tables(space.basis(), cell_rule);
  double total = 0.0;
  for (int c = 0; c < mesh.cell_count(); ++c) {
    if (!mesh.flags(c).in_omega) continue;
    double detj = 2.0 * mesh.cell_area(c);
    Mat2 jinv = mesh.jacobian(c).inverse();
    for (size_t qp = 0; qp < cell_rule.size(); ++qp) {
      double w = cell_rule[qp].w * detj;
      if (q.variant == QoiVariant::J1) {
        Vec2 uval = Vec2::Zero();
        for (int l = 0; l < space.nodes_per_cell(); ++l) {
          int node = space.cell_node(c, l);
          uval.x() += u.coeffs[2 * node] * tables.values[qp][l];
          uval.y() += u.coeffs[2 * node + 1] * tables.values[qp][l];
        }
        total += w * (uval.x() + uval.y());
      } else {
        Eigen::MatrixX2d g = tables.grads[qp] * jinv;
        double div = 0.0;
        for (int l = 0; l < space.nodes_per_cell(); ++l) {
          int node = space.cell_node(c, l);
          div += u.coeffs[2 * node] * g(l, 0) + u.coeffs[2 * node + 1] * g(l, 1);
        }
        total += w * div;
      }
    }
  }
  return total;
}

inline double qoi_value(const QoISpec& q, const FeField& u) {
  return qoi_value(q, u, rules_for_degree(u.space->degree()).cell);
}

// Dual load: j with j . coeffs(v) = J(v) for every v in the space, by the
// same quadrature rule as qoi_value (the identity is then exact).
inline Eigen::VectorXd qoi_load_vector(const QoISpec& q, const FunctionSpace& space,
                                       const std::vector<TriPoint>& cell_rule) {
  const TriMesh& mesh = space.mesh();
  CellTables tables(space.basis(), cell_rule);
  Eigen::VectorXd j = Eigen::VectorXd::Zero(space.dof_count());
  for (int c = 0; c < mesh.cell_count(); ++c) {
    if (!mesh.flags(c).in_omega) continue;
    double detj = 2.0 * mesh.cell_area(c);
    Mat2 jinv = mesh.jacobian(c).inverse();
    for (size_t qp = 0; qp < cell_rule.size(); ++qp) {
      double w = cell_rule[qp].w * detj;
      if (q.variant == QoiVariant::J1) {
        for (int l = 0; l < space.nodes_per_cell(); ++l) {
          j[space.cell_dof(c, l, 0)] += w * tables.values[qp][l];
          j[space.cell_dof(c, l, 1)] += w * tables.values[qp][l];
        }
      } else {
        Eigen::MatrixX2d g = tables.grads[qp] * jinv;
        for (int l = 0; l < space.nodes_per_cell(); ++l) {
          j[space.cell_dof(c, l, 0)] += w * g(l, 0);
          j[space.cell_dof(c, l, 1)] += w * g(l, 1);
        }
      }
    }
  }
  return j;
}

inline Eigen::VectorXd qoi_load_vector(const QoISpec& q, const FunctionSpace& space) {
  return qoi_load_vector(q, space, rules_for_degree(space.degree()).cell);
}

// Small-strain sanity numbers: largest principal-strain magnitude over all
// quadrature points, and the largest nodal displacement relative to the
// bounding-box diagonal.
struct FieldStats {
  double max_strain_intensity = 0.0;
  double max_rel_displacement = 0.0;
};

inline FieldStats field_stats(const FeField& u, const std::vector<TriPoint>& cell_rule) {
  const FunctionSpace& space = *u.space;
  const TriMesh& mesh = space.mesh();
  FieldStats st;
  double max_disp = 0.0;
  for (int node = 0; node < space.scalar_node_count(); ++node)
    max_disp = std::max(max_disp, Vec2(u.coeffs[2 * node], u.coeffs[2 * node + 1]).norm());
  Vec2 lo = mesh.vertex(0), hi = mesh.vertex(0);
  for (const auto& v : mesh.vertices()) {
    lo = lo.cwiseMin(v);
    hi = hi.cwiseMax(v);
  }
  st.max_rel_displacement = max_disp / (hi - lo).norm();
  for (int c = 0; c < mesh.cell_count(); ++c)
    for (const auto& qp : cell_rule) {
      Mat2 eps = strain(eval_gradient(u, c, Vec2(qp.x, qp.y)));
      double mid = 0.5 * (eps(0, 0) + eps(1, 1));
      double rad = std::sqrt(0.25 * (eps(0, 0) - eps(1, 1)) * (eps(0, 0) - eps(1, 1)) +
                             eps(0, 1) * eps(0, 1));
      st.max_strain_intensity =
          std::max({st.max_strain_intensity, std::abs(mid + rad), std::abs(mid - rad)});
    }
  return st;
}

}  // namespace goaladapt
