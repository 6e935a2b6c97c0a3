#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include "goaladapt/mesh.hpp"
#include "goaladapt/mesh_io.hpp"

using namespace goaladapt;

namespace {

// Independent edge counter: enumerate vertex pairs over cells from scratch.
std::pair<int, int> count_edges_brute(const TriMesh& mesh) {
  std::map<std::pair<int, int>, int> inc;
  for (int c = 0; c < mesh.cell_count(); ++c) {
    auto cell = mesh.cell(c);
    std::sort(cell.begin(), cell.end());
    inc[{cell[0], cell[1]}]++;
    inc[{cell[0], cell[2]}]++;
    inc[{cell[1], cell[2]}]++;
  }
  int interior = 0, boundary = 0;
  for (auto& [e, n] : inc) (n == 2 ? interior : boundary)++;
  return {interior, boundary};
}

// Conformity audit: every edge on 1 or 2 cells, and no vertex sits at the
// midpoint of an existing edge (the hanging-node signature of bisection).
void require_conforming(const TriMesh& mesh) {
  std::map<std::pair<int, int>, int> inc;
  for (int c = 0; c < mesh.cell_count(); ++c) {
    const auto& cell = mesh.cell(c);
    for (int i = 0; i < 3; ++i) inc[make_vert_pair(cell[(i + 1) % 3], cell[(i + 2) % 3])]++;
  }
  std::set<std::pair<double, double>> vertex_coords;
  for (const auto& v : mesh.vertices()) vertex_coords.insert({v.x(), v.y()});
  for (auto& [e, n] : inc) {
    REQUIRE(n >= 1);
    REQUIRE(n <= 2);
    Vec2 mid = 0.5 * (mesh.vertex(e.first) + mesh.vertex(e.second));
    REQUIRE(vertex_coords.count({mid.x(), mid.y()}) == 0);
  }
}

// Law-of-cosines angle oracle, written independently of quality_report.
double min_angle_brute(const TriMesh& mesh) {
  double best = 1e30;
  for (int c = 0; c < mesh.cell_count(); ++c) {
    Vec2 p0 = mesh.cell_vertex(c, 0), p1 = mesh.cell_vertex(c, 1), p2 = mesh.cell_vertex(c, 2);
    double a = (p1 - p2).norm(), b = (p0 - p2).norm(), cc = (p0 - p1).norm();
    double a0 = std::acos((b * b + cc * cc - a * a) / (2 * b * cc));
    double a1 = std::acos((a * a + cc * cc - b * b) / (2 * a * cc));
    double a2 = M_PI - a0 - a1;
    best = std::min({best, a0, a1, a2});
  }
  return best * 180.0 / M_PI;
}

}  // namespace

TEST_CASE("built-in meshes have the hand-counted edge structure") {
  auto tri = make_reference_triangle();
  CHECK(tri.cell_count() == 1);
  auto [ti, tb] = count_edges_brute(tri);
  CHECK(ti == 0);
  CHECK(tb == 3);

  auto sq = make_square_two_cells();
  auto [si, sb] = count_edges_brute(sq);
  CHECK(si == 1);
  CHECK(sb == 4);

  auto cc = make_criss_cross();
  CHECK(cc.vertex_count() == 5);
  auto [ci, cb] = count_edges_brute(cc);
  CHECK(ci == 4);
  CHECK(cb == 4);
}

TEST_CASE("edge topology classifies every edge once with unit normals") {
  auto cc = make_criss_cross(BoundaryTag::Neumann);
  auto topo = build_edge_topology(cc);
  CHECK(topo.interior_edges.size() == 4);
  CHECK(topo.neumann_edges.size() == 4);
  CHECK(topo.dirichlet_edges.empty());

  for (const auto& e : topo.interior_edges) {
    CHECK(std::abs(e.normal.norm() - 1.0) < 1e-14);
    // Independent recomputation: the normal must be perpendicular to the
    // edge vector and point from cell_left toward cell_right.
    Vec2 along = cc.vertex(e.vb) - cc.vertex(e.va);
    CHECK(std::abs(e.normal.dot(along)) < 1e-14);
    Vec2 lr = cc.centroid(e.cell_right) - cc.centroid(e.cell_left);
    CHECK(e.normal.dot(lr) > 0);
    CHECK(std::abs(e.length - along.norm()) < 1e-14);
  }
}

TEST_CASE("two-cell square has the expected diagonal interior edge") {
  auto sq = make_square_two_cells();
  auto topo = build_edge_topology(sq);
  REQUIRE(topo.interior_edges.size() == 1);
  const auto& e = topo.interior_edges[0];
  CHECK(e.va == 0);
  CHECK(e.vb == 2);
  CHECK(std::abs(e.normal.norm() - 1.0) < 1e-15);
  CHECK(std::abs(e.normal.dot(Vec2(1, 1))) < 1e-15);  // perpendicular to diagonal
  CHECK(std::abs(e.length - std::sqrt(2.0)) < 1e-15);
  // From the right cell the outward normal is the stored one negated.
  Vec2 from_right = outward_edge_normal(sq, e.cell_right, e.local_right);
  CHECK((from_right + e.normal).norm() < 1e-15);
}

TEST_CASE("per-cell boundary edge lengths sum to the perimeter") {
  auto cc = make_criss_cross();
  auto topo = build_edge_topology(cc);
  std::vector<double> per_cell(cc.cell_count(), 0.0);
  for (const auto& e : topo.interior_edges) {
    per_cell[e.cell_left] += e.length;
    per_cell[e.cell_right] += e.length;
  }
  for (const auto& e : topo.dirichlet_edges) per_cell[e.cell] += e.length;
  for (int c = 0; c < cc.cell_count(); ++c) {
    double perim = 0;
    for (int i = 0; i < 3; ++i)
      perim += (cc.cell_vertex(c, (i + 2) % 3) - cc.cell_vertex(c, (i + 1) % 3)).norm();
    CHECK(std::abs(per_cell[c] - perim) < 1e-14);
  }
}

TEST_CASE("empty marking returns the identical mesh") {
  auto sq = make_square_two_cells();
  auto r = refine(sq, {});
  CHECK(r.mesh.cell_count() == sq.cell_count());
  CHECK(r.mesh.vertex_count() == sq.vertex_count());
  for (int c = 0; c < sq.cell_count(); ++c) {
    CHECK(r.mesh.cell(c) == sq.cell(c));
    CHECK(r.parent[c] == c);
  }
}

TEST_CASE("marking one cell of the two-cell square drags in its neighbor") {
  auto sq = make_square_two_cells();
  auto r = refine(sq, {0});
  CHECK(r.mesh.cell_count() == 4);  // closure forces the neighbor too
  require_conforming(r.mesh);
  // Both children of each parent, areas partition the parent.
  std::vector<double> child_sum(2, 0.0);
  for (int c = 0; c < r.mesh.cell_count(); ++c) child_sum[r.parent[c]] += r.mesh.cell_area(c);
  CHECK(std::abs(child_sum[0] - sq.cell_area(0)) < 1e-15);
  CHECK(std::abs(child_sum[1] - sq.cell_area(1)) < 1e-15);
}

TEST_CASE("uniform refinement quadruples every cell") {
  auto mesh = make_criss_cross();
  auto r = refine_uniform(mesh);
  CHECK(r.mesh.cell_count() == 4 * mesh.cell_count());
  require_conforming(r.mesh);
  auto r2 = refine_uniform(r.mesh);
  CHECK(r2.mesh.cell_count() == 16 * mesh.cell_count());
  require_conforming(r2.mesh);
}

TEST_CASE("bisection keeps angles bounded over five uniform rounds") {
  auto mesh = make_square_two_cells();
  double initial = min_angle_brute(mesh);
  std::set<long long> angle_classes;
  for (int round = 0; round < 5; ++round) {
    mesh = refine_uniform(mesh).mesh;
    require_conforming(mesh);
    CHECK(min_angle_brute(mesh) >= initial / 2.0 - 1e-12);
    for (int c = 0; c < mesh.cell_count(); ++c) {
      Vec2 p0 = mesh.cell_vertex(c, 0), p1 = mesh.cell_vertex(c, 1), p2 = mesh.cell_vertex(c, 2);
      double a = (p1 - p2).norm(), b = (p0 - p2).norm(), cc = (p0 - p1).norm();
      double a0 = std::acos((b * b + cc * cc - a * a) / (2 * b * cc));
      double a1 = std::acos((a * a + cc * cc - b * b) / (2 * a * cc));
      angle_classes.insert(llround(a0 * 1e9));
      angle_classes.insert(llround(a1 * 1e9));
      angle_classes.insert(llround((M_PI - a0 - a1) * 1e9));
    }
  }
  // Newest-vertex bisection of the right isoceles square mesh reproduces
  // similar triangles: a handful of angle classes, not a growing set.
  CHECK(angle_classes.size() <= 6);
}

TEST_CASE("random adaptive marking keeps meshes conforming with inherited flags") {
  auto base = make_criss_cross();
  std::vector<CellFlags> flags(4);
  flags[0].in_omega_a = true;
  flags[1].region = 2;
  flags[2].in_omega = true;
  TriMesh mesh(base.vertices(), {base.cell(0), base.cell(1), base.cell(2), base.cell(3)}, flags,
               base.boundary());

  // Track expected flags through the parent maps.
  std::vector<CellFlags> expect = flags;
  std::mt19937 rng(12345);
  for (int round = 0; round < 6; ++round) {
    std::vector<int> marked;
    for (int c = 0; c < mesh.cell_count(); ++c)
      if (rng() % 3 == 0) marked.push_back(c);
    if (marked.empty()) marked.push_back(0);
    auto r = refine(mesh, marked);
    require_conforming(r.mesh);

    std::vector<double> parent_area(mesh.cell_count(), 0.0);
    std::vector<CellFlags> next_expect(r.mesh.cell_count());
    for (int c = 0; c < r.mesh.cell_count(); ++c) {
      parent_area[r.parent[c]] += r.mesh.cell_area(c);
      next_expect[c] = expect[r.parent[c]];
      CHECK(r.mesh.flags(c).region == expect[r.parent[c]].region);
      CHECK(r.mesh.flags(c).in_omega_a == expect[r.parent[c]].in_omega_a);
      CHECK(r.mesh.flags(c).in_omega == expect[r.parent[c]].in_omega);
    }
    for (int c = 0; c < mesh.cell_count(); ++c)
      CHECK(std::abs(parent_area[c] - mesh.cell_area(c)) <= 1e-12 * mesh.cell_area(c));
    mesh = r.mesh;
    expect = std::move(next_expect);
  }
}

TEST_CASE("quality report matches trigonometric oracles") {
  auto ref = make_reference_triangle();
  auto q = quality_report(ref);
  CHECK(std::abs(q.min_angle_deg - 45.0) < 1e-12);
  CHECK(q.cell_count == 1);
  CHECK(q.vertex_count == 3);

  // Equilateral triangle: all angles 60.
  std::vector<Vec2> v{{0, 0}, {1, 0}, {0.5, std::sqrt(3.0) / 2.0}};
  BoundaryMap b{{{0, 1}, BoundaryTag::Dirichlet},
                {{1, 2}, BoundaryTag::Dirichlet},
                {{0, 2}, BoundaryTag::Dirichlet}};
  TriMesh eq(v, {{{0, 1, 2}}}, {CellFlags{}}, b);
  CHECK(std::abs(quality_report(eq).min_angle_deg - 60.0) < 1e-9);

  // A ~20-cell mesh from a few refinement rounds vs the brute oracle.
  auto mesh = refine(make_criss_cross(), {0, 2}).mesh;
  mesh = refine(mesh, {1, 3, 5}).mesh;
  mesh = refine(mesh, {0, 4, 7, 9}).mesh;
  CHECK(mesh.cell_count() >= 15);
  CHECK(std::abs(quality_report(mesh).min_angle_deg - min_angle_brute(mesh)) < 1e-10);
}

TEST_CASE("mesh validation rejects malformed inputs") {
  std::vector<Vec2> v{{0, 0}, {1, 0}, {0, 1}};
  BoundaryMap full{{{0, 1}, BoundaryTag::Dirichlet},
                   {{1, 2}, BoundaryTag::Dirichlet},
                   {{0, 2}, BoundaryTag::Dirichlet}};
  // Clockwise cell.
  CHECK_THROWS_AS(TriMesh(v, {{{0, 2, 1}}}, {CellFlags{}}, full), MeshError);
  // Missing boundary tag.
  BoundaryMap partial{{{0, 1}, BoundaryTag::Dirichlet}};
  CHECK_THROWS_AS(TriMesh(v, {{{0, 1, 2}}}, {CellFlags{}}, partial), MeshError);
  // Tag on an interior edge.
  auto sq = make_square_two_cells();
  BoundaryMap bad = sq.boundary();
  bad[{0, 2}] = BoundaryTag::Neumann;
  CHECK_THROWS_AS(TriMesh(sq.vertices(), {sq.cell(0), sq.cell(1)},
                          std::vector<CellFlags>(2), bad),
                  MeshError);
  // Vertex index out of range.
  CHECK_THROWS_AS(TriMesh(v, {{{0, 1, 7}}}, {CellFlags{}}, full), MeshError);
}

TEST_CASE("native format round-trips bitwise") {
  auto base = make_criss_cross();
  std::vector<CellFlags> flags(4);
  flags[1].region = 3;
  flags[1].in_omega_a = true;
  flags[2].in_omega = true;
  BoundaryMap b = base.boundary();
  b[{0, 1}] = BoundaryTag::Neumann;
  TriMesh mesh(base.vertices(), {base.cell(0), base.cell(1), base.cell(2), base.cell(3)}, flags, b);
  // Perturb a coordinate to something with no short decimal representation.
  auto verts = mesh.vertices();
  verts[4] = Vec2(1.0 / 3.0, 2.0 / 7.0);
  TriMesh mesh2(verts, {mesh.cell(0), mesh.cell(1), mesh.cell(2), mesh.cell(3)}, flags, b);

  std::ostringstream os;
  save_trimesh(mesh2, os);
  std::istringstream is(os.str());
  auto loaded = load_trimesh(is);
  REQUIRE(loaded.vertex_count() == mesh2.vertex_count());
  for (int i = 0; i < loaded.vertex_count(); ++i) {
    CHECK(loaded.vertex(i).x() == mesh2.vertex(i).x());  // bitwise via %.17g
    CHECK(loaded.vertex(i).y() == mesh2.vertex(i).y());
  }
  for (int c = 0; c < loaded.cell_count(); ++c) {
    CHECK(loaded.cell(c) == mesh2.cell(c));
    CHECK(loaded.flags(c).region == mesh2.flags(c).region);
    CHECK(loaded.flags(c).in_omega_a == mesh2.flags(c).in_omega_a);
    CHECK(loaded.flags(c).in_omega == mesh2.flags(c).in_omega);
  }
  CHECK(loaded.boundary() == mesh2.boundary());

  std::ostringstream os2;
  save_trimesh(loaded, os2);
  CHECK(os.str() == os2.str());
}

TEST_CASE("msh reader handles the 2.2 subset with physical names") {
  std::string msh = R"($MeshFormat
2.2 0 8
$EndMeshFormat
$PhysicalNames
4
1 10 "dirichlet"
1 11 "neumann"
2 1 "tissue"
2 2 "fiber_band"
$EndPhysicalNames
$Nodes
4
1 0 0 0
2 1 0 0
3 1 1 0
4 0 1 0
$EndNodes
$Elements
6
1 1 2 10 1 1 2
2 1 2 11 2 2 3
3 1 2 11 3 3 4
4 1 2 10 4 4 1
5 2 2 1 1 1 2 3
6 2 2 2 1 1 4 3
$EndElements
)";
  std::istringstream is(msh);
  auto mesh = load_msh(is);
  CHECK(mesh.cell_count() == 2);
  CHECK(mesh.vertex_count() == 4);
  // Second triangle was clockwise in the file; the reader must reorient it.
  CHECK(mesh.cell_area(0) > 0);
  CHECK(mesh.cell_area(1) > 0);
  CHECK(mesh.flags(0).region == 1);
  CHECK(mesh.flags(1).region == 2);
  CHECK(!mesh.flags(0).in_omega_a);
  CHECK(mesh.flags(1).in_omega_a);  // physical name contains "fiber"
  int n_dir = 0, n_neu = 0;
  for (const auto& [pair, tag] : mesh.boundary())
    (tag == BoundaryTag::Dirichlet ? n_dir : n_neu)++;
  CHECK(n_dir == 2);
  CHECK(n_neu == 2);
}

TEST_CASE("msh reader rejects unusable files") {
  std::istringstream v4("$MeshFormat\n4.1 0 8\n$EndMeshFormat\n");
  CHECK_THROWS_AS(load_msh(v4), MeshError);
  std::istringstream empty("$MeshFormat\n2.2 0 8\n$EndMeshFormat\n");
  CHECK_THROWS_AS(load_msh(empty), MeshError);
}

TEST_CASE("load_mesh dispatches builtin descriptors") {
  CHECK(load_mesh("builtin:crisscross").cell_count() == 4);
  CHECK(load_mesh("builtin:square2").cell_count() == 2);
  CHECK(load_mesh("builtin:reference-triangle").cell_count() == 1);
  CHECK_THROWS_AS(load_mesh("builtin:nope"), ConfigError);
  CHECK_THROWS_AS(load_mesh("/nonexistent/path/mesh.txt"), IoError);
}
