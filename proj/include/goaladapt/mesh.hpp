#pragma once
// Conforming triangle meshes with boundary tags, region flags, and
// newest-vertex bisection refinement.
//
// Conventions used throughout:
//  - cells are counter-clockwise vertex triples (signed area > 0);
//  - local edge i is the edge opposite local vertex i, running from local
//    vertex (i+1)%3 to (i+2)%3 in the CCW cycle;
//  - the refinement edge of a cell is a local edge index; bisection inserts
//    the midpoint of that edge and assigns the children's refinement edges
//    so that at most two bisection levels occur per refine() call.

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <set>
#include <utility>
#include <vector>

#include "goaladapt/core.hpp"

namespace goaladapt {

enum class BoundaryTag { Dirichlet, Neumann };

struct CellFlags {
  int region = 1;
  bool in_omega_a = false;  // active (fiber) region membership
  bool in_omega = false;    // QoI region membership
};

using VertPair = std::pair<int, int>;  // always stored sorted (first < second)

inline VertPair make_vert_pair(int a, int b) { return a < b ? VertPair{a, b} : VertPair{b, a}; }

using BoundaryMap = std::map<VertPair, BoundaryTag>;

class TriMesh {
 public:
  // Validates everything; refinement edges are derived (longest edge, ties
  // by smallest opposite global vertex id) unless explicitly supplied by
  // refine(), which must preserve bisection state across generations.
  TriMesh(std::vector<Vec2> vertices, std::vector<std::array<int, 3>> cells,
          std::vector<CellFlags> flags, BoundaryMap boundary,
          std::vector<int> refinement_edges = {})
      : vertices_(std::move(vertices)),
        cells_(std::move(cells)),
        flags_(std::move(flags)),
        boundary_(std::move(boundary)),
        refedge_(std::move(refinement_edges)) {
    validate();
  }

  int vertex_count() const { return static_cast<int>(vertices_.size()); }
  int cell_count() const { return static_cast<int>(cells_.size()); }
  const Vec2& vertex(int v) const { return vertices_[v]; }
  const std::vector<Vec2>& vertices() const { return vertices_; }
  const std::array<int, 3>& cell(int c) const { return cells_[c]; }
  const CellFlags& flags(int c) const { return flags_[c]; }
  int refinement_edge(int c) const { return refedge_[c]; }
  const BoundaryMap& boundary() const { return boundary_; }

  Vec2 cell_vertex(int c, int local) const { return vertices_[cells_[c][local]]; }

  // Affine map x = v0 + J*ref with J columns (v1-v0, v2-v0).
  Mat2 jacobian(int c) const {
    Mat2 j;
    j.col(0) = cell_vertex(c, 1) - cell_vertex(c, 0);
    j.col(1) = cell_vertex(c, 2) - cell_vertex(c, 0);
    return j;
  }
  double cell_area(int c) const { return 0.5 * jacobian(c).determinant(); }
  Vec2 centroid(int c) const {
    return (cell_vertex(c, 0) + cell_vertex(c, 1) + cell_vertex(c, 2)) / 3.0;
  }
  Vec2 map_to_physical(int c, const Vec2& ref) const {
    return cell_vertex(c, 0) + jacobian(c) * ref;
  }
  Vec2 map_to_reference(int c, const Vec2& phys) const {
    Mat2 j = jacobian(c);
    Vec2 d = phys - cell_vertex(c, 0);
    double det = j.determinant();
    return Vec2((j(1, 1) * d.x() - j(0, 1) * d.y()) / det,
                (-j(1, 0) * d.x() + j(0, 0) * d.y()) / det);
  }

  // True when the reference coordinates of phys lie in the closed reference
  // triangle, within tol of its boundary.
  bool contains(int c, const Vec2& phys, double tol = 1e-12) const {
    Vec2 r = map_to_reference(c, phys);
    return r.x() >= -tol && r.y() >= -tol && r.x() + r.y() <= 1.0 + tol;
  }

 private:
  void validate() {
    if (cells_.empty() || vertices_.empty()) throw MeshError("mesh has no cells or no vertices");
    if (flags_.size() != cells_.size()) throw MeshError("cell flag list length mismatch");
    const int nv = vertex_count();
    for (size_t c = 0; c < cells_.size(); ++c) {
      for (int k = 0; k < 3; ++k) {
        int v = cells_[c][k];
        if (v < 0 || v >= nv) throw MeshError("cell references vertex out of range");
      }
      if (cells_[c][0] == cells_[c][1] || cells_[c][1] == cells_[c][2] ||
          cells_[c][0] == cells_[c][2])
        throw MeshError("degenerate cell (repeated vertex)");
      if (cell_area(static_cast<int>(c)) <= 0.0)
        throw MeshError("cell with non-positive area (orientation must be counter-clockwise)");
    }
    // Conformity: every edge belongs to one or two cells; 1-cell edges are
    // the boundary and must carry exactly one tag.
    std::map<VertPair, int> incidence;
    for (const auto& cell : cells_)
      for (int i = 0; i < 3; ++i) incidence[make_vert_pair(cell[(i + 1) % 3], cell[(i + 2) % 3])]++;
    for (const auto& [pair, count] : incidence) {
      if (count > 2) throw MeshError("non-manifold edge (shared by more than two cells)");
      if (count == 1 && !boundary_.count(pair)) throw MeshError("untagged boundary edge");
    }
    for (const auto& [pair, tag] : boundary_) {
      auto it = incidence.find(pair);
      if (it == incidence.end()) throw MeshError("boundary tag on non-existent edge");
      if (it->second != 1) throw MeshError("boundary tag on interior edge");
    }
    if (refedge_.empty()) {
      refedge_.resize(cells_.size());
      for (size_t c = 0; c < cells_.size(); ++c) refedge_[c] = longest_edge(static_cast<int>(c));
    } else if (refedge_.size() != cells_.size()) {
      throw MeshError("refinement edge list length mismatch");
    }
  }

  int longest_edge(int c) const {
    int best = 0;
    double best_len = -1.0;
    for (int i = 0; i < 3; ++i) {
      Vec2 d = cell_vertex(c, (i + 2) % 3) - cell_vertex(c, (i + 1) % 3);
      double len2 = d.squaredNorm();
      // Ties broken by the smaller opposite (global) vertex id so the choice
      // never depends on local vertex order.
      if (len2 > best_len ||
          (len2 == best_len && cells_[c][i] < cells_[c][best])) {
        best = i;
        best_len = len2;
      }
    }
    return best;
  }

  std::vector<Vec2> vertices_;
  std::vector<std::array<int, 3>> cells_;
  std::vector<CellFlags> flags_;
  BoundaryMap boundary_;
  std::vector<int> refedge_;
};

// ---------------------------------------------------------------------------
// Edge topology

struct InteriorEdge {
  int va, vb;            // endpoint vertex ids, va < vb
  int cell_left, cell_right;
  int local_left, local_right;
  Vec2 normal;           // unit, pointing out of cell_left
  double length;
};

// Reference coordinates of the point at parameter t in [0,1] along a cell's
// local edge, where t measures from the edge's smaller global vertex id.
// Local edge i runs from vertex (i+1)%3 to (i+2)%3; orientation 0 means the
// cell's first endpoint is the smaller id. Shared by assembly and estimation
// so both evaluate edge quadrature at bitwise-identical reference points.
inline Vec2 edge_ref_point(int local, int orient, double t) {
  static const Vec2 corner[3] = {Vec2(0, 0), Vec2(1, 0), Vec2(0, 1)};
  const Vec2& p = corner[(local + 1) % 3];
  const Vec2& q = corner[(local + 2) % 3];
  double s = orient == 0 ? t : 1.0 - t;
  return p + s * (q - p);
}

inline int edge_orientation(const TriMesh& mesh, int cell, int local, int va) {
  return mesh.cell(cell)[(local + 1) % 3] == va ? 0 : 1;
}

struct BoundaryEdgeInfo {
  int va, vb;  // va < vb
  int cell;
  int local;
  Vec2 normal;  // unit outward
  double length;
};

struct EdgeTopology {
  std::vector<InteriorEdge> interior_edges;
  std::vector<BoundaryEdgeInfo> neumann_edges;
  std::vector<BoundaryEdgeInfo> dirichlet_edges;
};

// Outward normal of local edge `local` of cell c: rotate the CCW edge
// direction clockwise by 90 degrees.
inline Vec2 outward_edge_normal(const TriMesh& mesh, int c, int local) {
  Vec2 a = mesh.cell_vertex(c, (local + 1) % 3);
  Vec2 b = mesh.cell_vertex(c, (local + 2) % 3);
  Vec2 t = (b - a).normalized();
  return Vec2(t.y(), -t.x());
}

inline EdgeTopology build_edge_topology(const TriMesh& mesh) {
  std::map<VertPair, std::vector<std::pair<int, int>>> edge_cells;  // pair -> (cell, local)
  for (int c = 0; c < mesh.cell_count(); ++c) {
    const auto& cell = mesh.cell(c);
    for (int i = 0; i < 3; ++i)
      edge_cells[make_vert_pair(cell[(i + 1) % 3], cell[(i + 2) % 3])].push_back({c, i});
  }
  EdgeTopology topo;
  for (const auto& [pair, inc] : edge_cells) {
    double length = (mesh.vertex(pair.second) - mesh.vertex(pair.first)).norm();
    if (inc.size() == 2) {
      // Left cell is the smaller id; the stored normal points out of it.
      auto [c0, l0] = inc[0];
      auto [c1, l1] = inc[1];
      if (c0 > c1) {
        std::swap(c0, c1);
        std::swap(l0, l1);
      }
      topo.interior_edges.push_back(
          {pair.first, pair.second, c0, c1, l0, l1, outward_edge_normal(mesh, c0, l0), length});
    } else if (inc.size() == 1) {
      auto [c, l] = inc[0];
      BoundaryEdgeInfo info{pair.first, pair.second, c, l, outward_edge_normal(mesh, c, l), length};
      if (mesh.boundary().at(pair) == BoundaryTag::Neumann)
        topo.neumann_edges.push_back(info);
      else
        topo.dirichlet_edges.push_back(info);
    } else {
      throw MeshError("non-manifold edge in topology build");
    }
  }
  return topo;
}

// ---------------------------------------------------------------------------
// Refinement

struct RefineResult {
  TriMesh mesh;
  std::vector<int> parent;  // parent cell id for every new cell
};

namespace detail {

struct ProtoCell {
  std::array<int, 3> verts;
  int refedge;
  int parent;
};

// Emit the bisection of one cell, recursing into children whose refinement
// edge (always an edge of the original parent) is itself marked. Recursion
// depth is bounded by 2: grandchild refinement edges contain a midpoint
// vertex and can never match an original marked edge.
inline void emit_bisected(const std::array<int, 3>& verts, int refedge, int parent,
                          const std::map<VertPair, int>& midpoint,
                          std::vector<ProtoCell>& out, int depth = 0) {
  const int p = verts[refedge];
  const int a = verts[(refedge + 1) % 3];
  const int b = verts[(refedge + 2) % 3];
  auto it = midpoint.find(make_vert_pair(a, b));
  if (it == midpoint.end()) {
    out.push_back({verts, refedge, parent});
    return;
  }
  if (depth > 2) throw MeshError("bisection recursion exceeded its structural bound");
  const int m = it->second;
  // Children keep CCW orientation; their refinement edges are the parent
  // edges (p,a) and (b,p) respectively, i.e. the edges opposite m.
  emit_bisected({p, a, m}, 2, parent, midpoint, out, depth + 1);
  emit_bisected({p, m, b}, 1, parent, midpoint, out, depth + 1);
}

inline RefineResult refine_edges(const TriMesh& mesh, std::set<VertPair> marked_edges) {
  // Closure: a cell any of whose edges is marked must have its refinement
  // edge marked too, so the bisection always splits every marked edge.
  // Worklist propagation over the edge->cells incidence map.
  std::map<VertPair, std::vector<int>> edge_cells;
  std::vector<std::array<VertPair, 3>> cell_edges(mesh.cell_count());
  for (int c = 0; c < mesh.cell_count(); ++c) {
    const auto& cell = mesh.cell(c);
    for (int i = 0; i < 3; ++i) {
      VertPair p = make_vert_pair(cell[(i + 1) % 3], cell[(i + 2) % 3]);
      cell_edges[c][i] = p;
      edge_cells[p].push_back(c);
    }
  }
  std::vector<VertPair> worklist(marked_edges.begin(), marked_edges.end());
  while (!worklist.empty()) {
    VertPair e = worklist.back();
    worklist.pop_back();
    for (int c : edge_cells.at(e)) {
      VertPair ref = cell_edges[c][mesh.refinement_edge(c)];
      if (marked_edges.insert(ref).second) worklist.push_back(ref);
    }
  }

  // Midpoint vertices, created in sorted-edge order for determinism.
  std::vector<Vec2> vertices = mesh.vertices();
  std::map<VertPair, int> midpoint;
  for (const auto& e : marked_edges) {
    midpoint[e] = static_cast<int>(vertices.size());
    vertices.push_back(0.5 * (mesh.vertex(e.first) + mesh.vertex(e.second)));
  }

  std::vector<ProtoCell> proto;
  proto.reserve(mesh.cell_count() * 2);
  for (int c = 0; c < mesh.cell_count(); ++c)
    emit_bisected(mesh.cell(c), mesh.refinement_edge(c), c, midpoint, proto);

  std::vector<std::array<int, 3>> cells(proto.size());
  std::vector<CellFlags> flags(proto.size());
  std::vector<int> refedges(proto.size());
  std::vector<int> parent(proto.size());
  for (size_t i = 0; i < proto.size(); ++i) {
    cells[i] = proto[i].verts;
    refedges[i] = proto[i].refedge;
    parent[i] = proto[i].parent;
    flags[i] = mesh.flags(proto[i].parent);  // region/omega flags inherit
  }

  // Boundary tags: split tagged edges inherit the parent tag.
  BoundaryMap boundary;
  for (const auto& [pair, tag] : mesh.boundary()) {
    auto it = midpoint.find(pair);
    if (it == midpoint.end()) {
      boundary.emplace(pair, tag);
    } else {
      boundary.emplace(make_vert_pair(pair.first, it->second), tag);
      boundary.emplace(make_vert_pair(it->second, pair.second), tag);
    }
  }

  return {TriMesh(std::move(vertices), std::move(cells), std::move(flags), std::move(boundary),
                  std::move(refedges)),
          std::move(parent)};
}

}  // namespace detail

// Bisect every marked cell (and whatever conformity closure drags in).
inline RefineResult refine(const TriMesh& mesh, const std::vector<int>& marked) {
  std::set<VertPair> marked_edges;
  for (int c : marked) {
    if (c < 0 || c >= mesh.cell_count()) throw MeshError("marked cell id out of range");
    const auto& cell = mesh.cell(c);
    int r = mesh.refinement_edge(c);
    marked_edges.insert(make_vert_pair(cell[(r + 1) % 3], cell[(r + 2) % 3]));
  }
  if (marked_edges.empty()) {
    // Empty marking: the identical mesh (state preserved).
    return {mesh, [&] {
              std::vector<int> id(mesh.cell_count());
              for (int c = 0; c < mesh.cell_count(); ++c) id[c] = c;
              return id;
            }()};
  }
  return detail::refine_edges(mesh, std::move(marked_edges));
}

// Split every edge: each cell becomes exactly four children.
inline RefineResult refine_uniform(const TriMesh& mesh) {
  std::set<VertPair> all_edges;
  for (int c = 0; c < mesh.cell_count(); ++c) {
    const auto& cell = mesh.cell(c);
    for (int i = 0; i < 3; ++i)
      all_edges.insert(make_vert_pair(cell[(i + 1) % 3], cell[(i + 2) % 3]));
  }
  return detail::refine_edges(mesh, std::move(all_edges));
}

// ---------------------------------------------------------------------------
// Quality

struct QualityReport {
  double min_angle_deg;
  double max_aspect_ratio;  // longest edge / (2 * inradius)
  int cell_count;
  int vertex_count;
};

inline QualityReport quality_report(const TriMesh& mesh) {
  QualityReport q{180.0, 0.0, mesh.cell_count(), mesh.vertex_count()};
  for (int c = 0; c < mesh.cell_count(); ++c) {
    double longest = 0.0, perimeter = 0.0;
    for (int i = 0; i < 3; ++i) {
      Vec2 u = mesh.cell_vertex(c, (i + 1) % 3) - mesh.cell_vertex(c, i);
      Vec2 v = mesh.cell_vertex(c, (i + 2) % 3) - mesh.cell_vertex(c, i);
      double angle = std::acos(std::clamp(u.dot(v) / (u.norm() * v.norm()), -1.0, 1.0));
      q.min_angle_deg = std::min(q.min_angle_deg, angle * 180.0 / M_PI);
      double len = u.norm();
      longest = std::max(longest, len);
      perimeter += len;
    }
    q.max_aspect_ratio = std::max(q.max_aspect_ratio,
                                  longest * perimeter / (4.0 * mesh.cell_area(c)));
  }
  return q;
}

// ---------------------------------------------------------------------------
// Tiny built-in meshes (documentation examples and test fixtures)

inline TriMesh make_reference_triangle(BoundaryTag tag = BoundaryTag::Dirichlet) {
  std::vector<Vec2> v{{0, 0}, {1, 0}, {0, 1}};
  BoundaryMap b{{{0, 1}, tag}, {{1, 2}, tag}, {{0, 2}, tag}};
  return TriMesh(v, {{{0, 1, 2}}}, {CellFlags{}}, b);
}

inline TriMesh make_square_two_cells(BoundaryTag tag = BoundaryTag::Dirichlet) {
  std::vector<Vec2> v{{0, 0}, {1, 0}, {1, 1}, {0, 1}};
  std::vector<std::array<int, 3>> cells{{{0, 1, 2}}, {{0, 2, 3}}};
  BoundaryMap b{{{0, 1}, tag}, {{1, 2}, tag}, {{2, 3}, tag}, {{0, 3}, tag}};
  return TriMesh(v, cells, {CellFlags{}, CellFlags{}}, b);
}

inline TriMesh make_criss_cross(BoundaryTag tag = BoundaryTag::Dirichlet) {
  std::vector<Vec2> v{{0, 0}, {1, 0}, {1, 1}, {0, 1}, {0.5, 0.5}};
  std::vector<std::array<int, 3>> cells{{{0, 1, 4}}, {{1, 2, 4}}, {{2, 3, 4}}, {{0, 4, 3}}};
  BoundaryMap b{{{0, 1}, tag}, {{1, 2}, tag}, {{2, 3}, tag}, {{0, 3}, tag}};
  return TriMesh(v, cells, std::vector<CellFlags>(4), b);
}

// n x n grid of unit-square quarters, each split along the (i,j)-(i+1,j+1)
// diagonal: 2*n*n cells, all boundary edges carrying one tag.
inline TriMesh make_structured_square(int n, BoundaryTag tag = BoundaryTag::Dirichlet) {
  if (n < 1) throw ConfigError("structured square subdivision count must be at least 1");
  auto vid = [n](int i, int j) { return j * (n + 1) + i; };
  std::vector<Vec2> vertices((n + 1) * (n + 1));
  for (int j = 0; j <= n; ++j)
    for (int i = 0; i <= n; ++i)
      vertices[vid(i, j)] = Vec2(static_cast<double>(i) / n, static_cast<double>(j) / n);
  std::vector<std::array<int, 3>> cells;
  cells.reserve(2 * n * n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      cells.push_back({vid(i, j), vid(i + 1, j), vid(i + 1, j + 1)});
      cells.push_back({vid(i, j), vid(i + 1, j + 1), vid(i, j + 1)});
    }
  BoundaryMap boundary;
  for (int i = 0; i < n; ++i) {
    boundary.emplace(make_vert_pair(vid(i, 0), vid(i + 1, 0)), tag);
    boundary.emplace(make_vert_pair(vid(i, n), vid(i + 1, n)), tag);
    boundary.emplace(make_vert_pair(vid(0, i), vid(0, i + 1)), tag);
    boundary.emplace(make_vert_pair(vid(n, i), vid(n, i + 1)), tag);
  }
  return TriMesh(std::move(vertices), std::move(cells), std::vector<CellFlags>(2 * n * n),
                 std::move(boundary));
}

// Rebuild with per-cell flags recomputed by a predicate over the final cells
// (typically centroid membership tests). Connectivity, boundary tags and
// bisection state are preserved.
template <typename FlagFn>
TriMesh retag_cells(const TriMesh& m, FlagFn fn) {
  std::vector<std::array<int, 3>> cells;
  std::vector<CellFlags> flags;
  std::vector<int> refedges;
  cells.reserve(m.cell_count());
  flags.reserve(m.cell_count());
  refedges.reserve(m.cell_count());
  for (int c = 0; c < m.cell_count(); ++c) {
    cells.push_back(m.cell(c));
    flags.push_back(fn(m, c));
    refedges.push_back(m.refinement_edge(c));
  }
  return TriMesh(m.vertices(), std::move(cells), std::move(flags), m.boundary(),
                 std::move(refedges));
}

// Rebuild with boundary tags recomputed from edge midpoints. Connectivity,
// flags and bisection state are preserved; fn(midpoint, old_tag) -> new tag.
template <typename TagFn>
TriMesh retag_boundary(const TriMesh& m, TagFn fn) {
  BoundaryMap boundary;
  for (const auto& [pair, tag] : m.boundary())
    boundary.emplace(pair, fn(0.5 * (m.vertex(pair.first) + m.vertex(pair.second)), tag));
  std::vector<std::array<int, 3>> cells;
  std::vector<CellFlags> flags;
  std::vector<int> refedges;
  for (int c = 0; c < m.cell_count(); ++c) {
    cells.push_back(m.cell(c));
    flags.push_back(m.flags(c));
    refedges.push_back(m.refinement_edge(c));
  }
  return TriMesh(m.vertices(), std::move(cells), std::move(flags), std::move(boundary),
                 std::move(refedges));
}

}  // namespace goaladapt
