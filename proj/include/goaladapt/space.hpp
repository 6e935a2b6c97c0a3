#pragma once
// Continuous vector-valued Lagrange spaces P1/P2/P3 on a TriMesh.
//
// Scalar node numbering: mesh vertices first, then (degree-1) nodes per
// edge in sorted-edge order (positions parametrized from the smaller to the
// larger vertex id, so both incident cells agree on them), then interior
// nodes per cell. Each scalar node carries two displacement DOFs,
// interleaved: dof = 2*node + component.

#include <array>
#include <map>
#include <vector>

#include "goaladapt/mesh.hpp"

namespace goaladapt {

// Nodal basis on the reference triangle, built by inverting the monomial
// Vandermonde matrix at the reference nodes. Degrees are small enough that
// full-pivot inversion is exact to machine precision.
class ReferenceBasis {
 public:
  explicit ReferenceBasis(int degree) : degree_(degree) {
    if (degree < 1 || degree > 3) throw ConfigError("unsupported polynomial degree");
    // Monomial exponents, total degree ascending.
    for (int d = 0; d <= degree; ++d)
      for (int a = d; a >= 0; --a) monomials_.push_back({a, d - a});
    // Reference nodes: vertices, then edge nodes (edge i opposite vertex i,
    // running from vertex (i+1)%3 to (i+2)%3), then the interior node.
    const std::array<Vec2, 3> v{Vec2(0, 0), Vec2(1, 0), Vec2(0, 1)};
    nodes_.assign(v.begin(), v.end());
    for (int i = 0; i < 3; ++i)
      for (int j = 1; j < degree; ++j) {
        double t = static_cast<double>(j) / degree;
        nodes_.push_back(v[(i + 1) % 3] + t * (v[(i + 2) % 3] - v[(i + 1) % 3]));
      }
    if (degree == 3) nodes_.push_back(Vec2(1.0 / 3.0, 1.0 / 3.0));

    const int n = size();
    Eigen::MatrixXd vand(n, n);
    for (int i = 0; i < n; ++i)
      for (int m = 0; m < n; ++m)
        vand(i, m) = ipow(nodes_[i].x(), monomials_[m][0]) * ipow(nodes_[i].y(), monomials_[m][1]);
    coeffs_ = vand.fullPivLu().solve(Eigen::MatrixXd::Identity(n, n));
  }

  int degree() const { return degree_; }
  int size() const { return static_cast<int>(nodes_.size()); }
  const std::vector<Vec2>& nodes() const { return nodes_; }

  // Basis values at a reference point.
  Eigen::VectorXd values(const Vec2& p) const {
    return coeffs_.transpose() * monomial_row(p);
  }
  // Reference gradients, one row (d/dx, d/dy) per basis function.
  Eigen::MatrixX2d gradients(const Vec2& p) const {
    const int n = size();
    Eigen::MatrixX2d g(n, 2);
    Eigen::VectorXd mx(n), my(n);
    for (int m = 0; m < n; ++m) {
      auto [a, b] = std::pair(monomials_[m][0], monomials_[m][1]);
      mx(m) = a > 0 ? a * ipow(p.x(), a - 1) * ipow(p.y(), b) : 0.0;
      my(m) = b > 0 ? b * ipow(p.x(), a) * ipow(p.y(), b - 1) : 0.0;
    }
    g.col(0) = coeffs_.transpose() * mx;
    g.col(1) = coeffs_.transpose() * my;
    return g;
  }
  // Reference second derivatives per basis function: (dxx, dxy, dyy).
  Eigen::MatrixX3d hessians(const Vec2& p) const {
    const int n = size();
    Eigen::VectorXd mxx(n), mxy(n), myy(n);
    for (int m = 0; m < n; ++m) {
      auto [a, b] = std::pair(monomials_[m][0], monomials_[m][1]);
      mxx(m) = a > 1 ? a * (a - 1) * ipow(p.x(), a - 2) * ipow(p.y(), b) : 0.0;
      mxy(m) = (a > 0 && b > 0) ? a * b * ipow(p.x(), a - 1) * ipow(p.y(), b - 1) : 0.0;
      myy(m) = b > 1 ? b * (b - 1) * ipow(p.x(), a) * ipow(p.y(), b - 2) : 0.0;
    }
    Eigen::MatrixX3d h(n, 3);
    h.col(0) = coeffs_.transpose() * mxx;
    h.col(1) = coeffs_.transpose() * mxy;
    h.col(2) = coeffs_.transpose() * myy;
    return h;
  }

 private:
  static double ipow(double x, int e) {
    double r = 1.0;
    for (int i = 0; i < e; ++i) r *= x;
    return r;
  }
  Eigen::VectorXd monomial_row(const Vec2& p) const {
    Eigen::VectorXd row(size());
    for (int m = 0; m < size(); ++m)
      row(m) = ipow(p.x(), monomials_[m][0]) * ipow(p.y(), monomials_[m][1]);
    return row;
  }

  int degree_;
  std::vector<std::array<int, 2>> monomials_;
  std::vector<Vec2> nodes_;
  Eigen::MatrixXd coeffs_;  // column j = monomial coefficients of basis j
};

class FunctionSpace {
 public:
  FunctionSpace(const TriMesh& mesh, int degree) : mesh_(&mesh), basis_(degree) {
    const int k = degree;
    const int nv = mesh.vertex_count();
    const int per_edge = k - 1;
    const int per_cell_interior = (k - 1) * (k - 2) / 2;

    // Edge enumeration in sorted-pair order; both incident cells see it.
    std::map<VertPair, int> edge_index;
    for (int c = 0; c < mesh.cell_count(); ++c) {
      const auto& cell = mesh.cell(c);
      for (int i = 0; i < 3; ++i) {
        VertPair p = make_vert_pair(cell[(i + 1) % 3], cell[(i + 2) % 3]);
        edge_index.emplace(p, 0);
      }
    }
    int ne = 0;
    for (auto& [pair, idx] : edge_index) idx = ne++;

    n_scalar_nodes_ = nv + ne * per_edge + mesh.cell_count() * per_cell_interior;
    node_coords_.resize(n_scalar_nodes_);
    for (int v = 0; v < nv; ++v) node_coords_[v] = mesh.vertex(v);
    // Edge node coordinates are computed exactly once per edge, from the
    // sorted pair, so shared nodes have identical coordinates on both sides.
    for (const auto& [pair, e] : edge_index) {
      Vec2 a = mesh.vertex(pair.first), b = mesh.vertex(pair.second);
      for (int j = 0; j < per_edge; ++j)
        node_coords_[nv + e * per_edge + j] = a + (static_cast<double>(j + 1) / k) * (b - a);
    }

    nodes_per_cell_ = basis_.size();
    cell_nodes_.resize(static_cast<size_t>(mesh.cell_count()) * nodes_per_cell_);
    for (int c = 0; c < mesh.cell_count(); ++c) {
      const auto& cell = mesh.cell(c);
      int* local = &cell_nodes_[static_cast<size_t>(c) * nodes_per_cell_];
      for (int i = 0; i < 3; ++i) local[i] = cell[i];
      for (int i = 0; i < 3; ++i) {
        int p = cell[(i + 1) % 3], q = cell[(i + 2) % 3];
        int e = edge_index.at(make_vert_pair(p, q));
        for (int j = 0; j < per_edge; ++j) {
          // Local node j sits at parameter (j+1)/k from p toward q; the
          // global numbering runs from min(p,q), so reverse when p > q.
          int jj = p < q ? j : per_edge - 1 - j;
          local[3 + i * per_edge + j] = nv + e * per_edge + jj;
        }
      }
      for (int j = 0; j < per_cell_interior; ++j) {
        int node = nv + ne * per_edge + c * per_cell_interior + j;
        local[3 + 3 * per_edge + j] = node;
        node_coords_[node] = mesh.map_to_physical(c, basis_.nodes()[3 + 3 * per_edge + j]);
      }
    }

    // Dirichlet nodes: every node on a Dirichlet-tagged boundary edge;
    // both displacement components are constrained (u_D = 0).
    std::vector<bool> on_dirichlet(n_scalar_nodes_, false);
    for (const auto& [pair, tag] : mesh.boundary()) {
      if (tag != BoundaryTag::Dirichlet) continue;
      on_dirichlet[pair.first] = on_dirichlet[pair.second] = true;
      int e = edge_index.at(pair);
      for (int j = 0; j < per_edge; ++j) on_dirichlet[nv + e * per_edge + j] = true;
    }
    node_on_dirichlet_ = std::move(on_dirichlet);
    for (int n = 0; n < n_scalar_nodes_; ++n)
      if (node_on_dirichlet_[n]) {
        dirichlet_dofs_.push_back(2 * n);
        dirichlet_dofs_.push_back(2 * n + 1);
      }
  }

  const TriMesh& mesh() const { return *mesh_; }
  const ReferenceBasis& basis() const { return basis_; }
  int degree() const { return basis_.degree(); }
  int scalar_node_count() const { return n_scalar_nodes_; }
  int dof_count() const { return 2 * n_scalar_nodes_; }
  int nodes_per_cell() const { return nodes_per_cell_; }

  int cell_node(int cell, int local) const {
    return cell_nodes_[static_cast<size_t>(cell) * nodes_per_cell_ + local];
  }
  static int dof_of(int node, int comp) { return 2 * node + comp; }
  int cell_dof(int cell, int local, int comp) const { return 2 * cell_node(cell, local) + comp; }

  const Vec2& node_coord(int node) const { return node_coords_[node]; }
  bool node_constrained(int node) const { return node_on_dirichlet_[node]; }
  const std::vector<int>& dirichlet_dofs() const { return dirichlet_dofs_; }

 private:
  const TriMesh* mesh_;
  ReferenceBasis basis_;
  int n_scalar_nodes_ = 0;
  int nodes_per_cell_ = 0;
  std::vector<int> cell_nodes_;
  std::vector<Vec2> node_coords_;
  std::vector<bool> node_on_dirichlet_;
  std::vector<int> dirichlet_dofs_;
};

inline FunctionSpace build_space(const TriMesh& mesh, int degree) {
  return FunctionSpace(mesh, degree);
}

struct FeField {
  const FunctionSpace* space = nullptr;
  Eigen::VectorXd coeffs;

  FeField() = default;
  explicit FeField(const FunctionSpace& s) : space(&s), coeffs(Eigen::VectorXd::Zero(s.dof_count())) {}
  FeField(const FunctionSpace& s, Eigen::VectorXd c) : space(&s), coeffs(std::move(c)) {
    if (coeffs.size() != s.dof_count()) throw Error("coefficient vector length mismatch");
  }
};

// Field value at a reference point of a cell.
inline Vec2 eval_value(const FeField& f, int cell, const Vec2& ref) {
  const auto& sp = *f.space;
  Eigen::VectorXd phi = sp.basis().values(ref);
  Vec2 u = Vec2::Zero();
  for (int l = 0; l < sp.nodes_per_cell(); ++l) {
    int n = sp.cell_node(cell, l);
    u.x() += f.coeffs[2 * n] * phi[l];
    u.y() += f.coeffs[2 * n + 1] * phi[l];
  }
  return u;
}

// Physical gradient G with G(i,j) = d u_i / d x_j.
inline Mat2 eval_gradient(const FeField& f, int cell, const Vec2& ref) {
  const auto& sp = *f.space;
  Mat2 jinv_t = sp.mesh().jacobian(cell).inverse().transpose();
  Eigen::MatrixX2d gref = sp.basis().gradients(ref);
  Mat2 g = Mat2::Zero();
  for (int l = 0; l < sp.nodes_per_cell(); ++l) {
    int n = sp.cell_node(cell, l);
    Vec2 gp = jinv_t * Vec2(gref(l, 0), gref(l, 1));
    g.row(0) += f.coeffs[2 * n] * gp.transpose();
    g.row(1) += f.coeffs[2 * n + 1] * gp.transpose();
  }
  return g;
}

// Physical Hessians of both components (affine cells: H = Jinv^T Href Jinv).
inline std::array<Mat2, 2> eval_hessian(const FeField& f, int cell, const Vec2& ref) {
  const auto& sp = *f.space;
  Mat2 jinv = sp.mesh().jacobian(cell).inverse();
  Eigen::MatrixX3d href = sp.basis().hessians(ref);
  std::array<Mat2, 2> h{Mat2::Zero(), Mat2::Zero()};
  for (int l = 0; l < sp.nodes_per_cell(); ++l) {
    int n = sp.cell_node(cell, l);
    Mat2 hr;
    hr << href(l, 0), href(l, 1), href(l, 1), href(l, 2);
    Mat2 hp = jinv.transpose() * hr * jinv;
    h[0] += f.coeffs[2 * n] * hp;
    h[1] += f.coeffs[2 * n + 1] * hp;
  }
  return h;
}

// Nodal interpolation onto another space over the SAME mesh. Exact whenever
// the source field is a polynomial the target space contains.
inline FeField interpolate_to(const FeField& f, const FunctionSpace& target) {
  if (&f.space->mesh() != &target.mesh()) throw Error("interpolation requires a shared mesh");
  FeField out(target);
  const auto& ref_nodes = target.basis().nodes();
  for (int c = 0; c < target.mesh().cell_count(); ++c)
    for (int l = 0; l < target.nodes_per_cell(); ++l) {
      Vec2 u = eval_value(f, c, ref_nodes[l]);
      int n = target.cell_node(c, l);
      out.coeffs[2 * n] = u.x();
      out.coeffs[2 * n + 1] = u.y();
    }
  return out;
}

// The Lagrange interpolant i_h: enriched-space field onto the coarser space.
inline FeField interpolate_down(const FeField& fine, const FunctionSpace& coarse_space) {
  if (fine.space->degree() <= coarse_space.degree())
    throw Error("interpolate_down expects a strictly higher-degree source");
  return interpolate_to(fine, coarse_space);
}

// Locate the cell containing a physical point (smallest barycentric
// violation wins; deterministic scan order breaks exact ties).
inline int locate_cell(const TriMesh& mesh, const Vec2& p, double tol = 1e-9) {
  int best = -1;
  double best_violation = 1e300;
  for (int c = 0; c < mesh.cell_count(); ++c) {
    Vec2 r = mesh.map_to_reference(c, p);
    double viol = std::max({-r.x(), -r.y(), r.x() + r.y() - 1.0, 0.0});
    if (viol < best_violation) {
      best_violation = viol;
      best = c;
    }
  }
  if (best < 0 || best_violation > tol) throw Error("point lies outside the mesh");
  return best;
}

inline Vec2 evaluate_at(const FeField& f, const Vec2& p) {
  int cell = locate_cell(f.space->mesh(), p);
  return eval_value(f, cell, f.space->mesh().map_to_reference(cell, p));
}

}  // namespace goaladapt
