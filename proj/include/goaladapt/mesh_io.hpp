#pragma once
// Mesh readers/writers: the native `trimesh v1` text format (round-trips
// bitwise via %.17g) and a reader for the MSH 2.2 ASCII subset (nodes,
// 2-node lines, 3-node triangles, physical names).

#include <cctype>
#include <fstream>
#include <sstream>
#include <string>

#include "goaladapt/mesh.hpp"

namespace goaladapt {

inline void save_trimesh(const TriMesh& mesh, std::ostream& os) {
  os << "trimesh v1\n";
  os << "vertices " << mesh.vertex_count() << "\n";
  for (const auto& v : mesh.vertices()) os << fmt_g17(v.x()) << " " << fmt_g17(v.y()) << "\n";
  os << "cells " << mesh.cell_count() << "\n";
  for (int c = 0; c < mesh.cell_count(); ++c) {
    const auto& cell = mesh.cell(c);
    const auto& f = mesh.flags(c);
    os << cell[0] << " " << cell[1] << " " << cell[2] << " " << f.region << " "
       << (f.in_omega_a ? 1 : 0) << " " << (f.in_omega ? 1 : 0) << "\n";
  }
  os << "boundary " << mesh.boundary().size() << "\n";
  for (const auto& [pair, tag] : mesh.boundary())
    os << pair.first << " " << pair.second << " " << (tag == BoundaryTag::Dirichlet ? "D" : "N")
       << "\n";
}

inline void save_trimesh(const TriMesh& mesh, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open mesh file for writing: " + path);
  save_trimesh(mesh, os);
  if (!os) throw IoError("write failure on mesh file: " + path);
}

inline TriMesh load_trimesh(std::istream& is, const std::string& what = "<stream>") {
  auto fail = [&](const std::string& msg) -> MeshError {
    return MeshError("mesh file " + what + ": " + msg);
  };
  std::string header, version, word;
  if (!(is >> header >> version) || header != "trimesh" || version != "v1")
    throw fail("expected header 'trimesh v1'");
  int n = 0;
  if (!(is >> word >> n) || word != "vertices" || n <= 0) throw fail("bad vertex count");
  std::vector<Vec2> vertices(n);
  for (auto& v : vertices)
    if (!(is >> v.x() >> v.y())) throw fail("bad vertex line");
  int m = 0;
  if (!(is >> word >> m) || word != "cells" || m <= 0) throw fail("bad cell count");
  std::vector<std::array<int, 3>> cells(m);
  std::vector<CellFlags> flags(m);
  for (int c = 0; c < m; ++c) {
    int fa = 0, fo = 0;
    if (!(is >> cells[c][0] >> cells[c][1] >> cells[c][2] >> flags[c].region >> fa >> fo))
      throw fail("bad cell line");
    if ((fa != 0 && fa != 1) || (fo != 0 && fo != 1)) throw fail("cell flags must be 0 or 1");
    flags[c].in_omega_a = fa;
    flags[c].in_omega = fo;
  }
  int b = 0;
  if (!(is >> word >> b) || word != "boundary" || b < 0) throw fail("bad boundary count");
  BoundaryMap boundary;
  for (int e = 0; e < b; ++e) {
    int i = 0, j = 0;
    std::string tag;
    if (!(is >> i >> j >> tag) || (tag != "D" && tag != "N")) throw fail("bad boundary line");
    auto pair = make_vert_pair(i, j);
    if (!boundary.emplace(pair, tag == "D" ? BoundaryTag::Dirichlet : BoundaryTag::Neumann).second)
      throw fail("duplicate boundary edge");
  }
  try {
    return TriMesh(std::move(vertices), std::move(cells), std::move(flags), std::move(boundary));
  } catch (const MeshError& err) {
    throw fail(err.what());
  }
}

inline TriMesh load_trimesh(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open mesh file: " + path);
  return load_trimesh(is, path);
}

// MSH 2.2 ASCII subset. Boundary lines must carry a physical name
// `dirichlet` or `neumann`; triangle physical ids become region ids, and
// physical names containing `fiber` / `interest` set the corresponding cell
// flags. Clockwise triangles are silently reoriented.
inline TriMesh load_msh(std::istream& is, const std::string& what = "<stream>") {
  auto fail = [&](const std::string& msg) -> MeshError {
    return MeshError("msh file " + what + ": " + msg);
  };
  std::map<int, std::string> phys_names;
  std::map<int, Vec2> nodes_by_id;
  struct RawTri {
    std::array<int, 3> nodes;
    int phys;
  };
  struct RawLine {
    std::array<int, 2> nodes;
    int phys;
  };
  std::vector<RawTri> tris;
  std::vector<RawLine> lines;

  std::string token;
  while (is >> token) {
    if (token == "$MeshFormat") {
      std::string ver;
      int ftype = 0, dsize = 0;
      if (!(is >> ver >> ftype >> dsize)) throw fail("bad $MeshFormat");
      if (ver.rfind("2.2", 0) != 0 || ftype != 0)
        throw fail("only MSH 2.2 ASCII is supported (got version " + ver + ")");
    } else if (token == "$PhysicalNames") {
      int n = 0;
      if (!(is >> n)) throw fail("bad $PhysicalNames count");
      for (int i = 0; i < n; ++i) {
        int dim = 0, id = 0;
        std::string name;
        if (!(is >> dim >> id)) throw fail("bad physical name line");
        std::getline(is, name);
        auto l = name.find('"'), r = name.rfind('"');
        if (l == std::string::npos || r <= l) throw fail("physical name not quoted");
        std::string clean = name.substr(l + 1, r - l - 1);
        for (auto& ch : clean) ch = static_cast<char>(std::tolower(ch));
        phys_names[id] = clean;
      }
    } else if (token == "$Nodes") {
      int n = 0;
      if (!(is >> n)) throw fail("bad $Nodes count");
      for (int i = 0; i < n; ++i) {
        int id = 0;
        double x = 0, y = 0, z = 0;
        if (!(is >> id >> x >> y >> z)) throw fail("bad node line");
        nodes_by_id[id] = Vec2(x, y);
      }
    } else if (token == "$Elements") {
      int n = 0;
      if (!(is >> n)) throw fail("bad $Elements count");
      for (int i = 0; i < n; ++i) {
        int id = 0, type = 0, ntags = 0;
        if (!(is >> id >> type >> ntags)) throw fail("bad element line");
        int phys = 0, dummy = 0;
        for (int t = 0; t < ntags; ++t) {
          int v = 0;
          if (!(is >> v)) throw fail("bad element tag");
          if (t == 0) phys = v;
          (void)dummy;
        }
        if (type == 1) {
          RawLine l{};
          if (!(is >> l.nodes[0] >> l.nodes[1])) throw fail("bad line element");
          l.phys = phys;
          lines.push_back(l);
        } else if (type == 2) {
          RawTri t2{};
          if (!(is >> t2.nodes[0] >> t2.nodes[1] >> t2.nodes[2])) throw fail("bad triangle element");
          t2.phys = phys;
          tris.push_back(t2);
        } else if (type == 15) {
          int v = 0;
          if (!(is >> v)) throw fail("bad point element");  // skip point elements
        } else {
          throw fail("unsupported element type " + std::to_string(type));
        }
      }
    }
    // Unknown sections ($EndX, $Comments...) are skipped token-wise.
  }
  if (tris.empty()) throw fail("no triangles");

  // Compact node ids in first-use order (triangles first, then lines).
  std::map<int, int> remap;
  std::vector<Vec2> vertices;
  auto resolve = [&](int id) {
    auto it = remap.find(id);
    if (it != remap.end()) return it->second;
    auto nit = nodes_by_id.find(id);
    if (nit == nodes_by_id.end()) throw fail("element references unknown node");
    int v = static_cast<int>(vertices.size());
    remap[id] = v;
    vertices.push_back(nit->second);
    return v;
  };

  std::vector<std::array<int, 3>> cells;
  std::vector<CellFlags> flags;
  for (const auto& t : tris) {
    std::array<int, 3> cell{resolve(t.nodes[0]), resolve(t.nodes[1]), resolve(t.nodes[2])};
    Vec2 d1 = vertices[cell[1]] - vertices[cell[0]];
    Vec2 d2 = vertices[cell[2]] - vertices[cell[0]];
    if (d1.x() * d2.y() - d1.y() * d2.x() < 0) std::swap(cell[1], cell[2]);
    CellFlags f;
    f.region = t.phys > 0 ? t.phys : 1;
    auto it = phys_names.find(t.phys);
    if (it != phys_names.end()) {
      f.in_omega_a = it->second.find("fiber") != std::string::npos;
      f.in_omega = it->second.find("interest") != std::string::npos;
    }
    cells.push_back(cell);
    flags.push_back(f);
  }
  BoundaryMap boundary;
  for (const auto& l : lines) {
    auto it = phys_names.find(l.phys);
    if (it == phys_names.end())
      throw fail("boundary line without a named physical group");
    BoundaryTag tag;
    if (it->second == "dirichlet")
      tag = BoundaryTag::Dirichlet;
    else if (it->second == "neumann")
      tag = BoundaryTag::Neumann;
    else
      throw fail("boundary physical name must be 'dirichlet' or 'neumann', got '" + it->second +
                 "'");
    boundary[make_vert_pair(resolve(l.nodes[0]), resolve(l.nodes[1]))] = tag;
  }
  try {
    return TriMesh(std::move(vertices), std::move(cells), std::move(flags), std::move(boundary));
  } catch (const MeshError& err) {
    throw fail(err.what());
  }
}

inline TriMesh load_msh(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open msh file: " + path);
  return load_msh(is, path);
}

// Dispatch on source: `builtin:` descriptors, `.msh` files, native files.
inline TriMesh load_mesh(const std::string& source) {
  if (source.rfind("builtin:", 0) == 0) {
    std::string name = source.substr(8);
    if (name == "reference-triangle") return make_reference_triangle();
    if (name == "square2") return make_square_two_cells();
    if (name == "crisscross") return make_criss_cross();
    throw ConfigError("unknown built-in mesh descriptor: " + source);
  }
  if (source.size() > 4 && source.substr(source.size() - 4) == ".msh") return load_msh(source);
  return load_trimesh(source);
}

}  // namespace goaladapt
