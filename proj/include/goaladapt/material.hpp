#pragma once
// Plane-strain material data, fiber activation, and QoI descriptors.

#include <map>
#include <vector>

#include "goaladapt/mesh.hpp"

namespace goaladapt {

struct Material {
  double youngs;   // E, MPa
  double poisson;  // nu, dimensionless

  // Plane-strain Lame parameters.
  double lambda() const { return youngs * poisson / ((1 + poisson) * (1 - 2 * poisson)); }
  double mu() const { return youngs / (2 * (1 + poisson)); }
};

class MaterialField {
 public:
  MaterialField() = default;

  void set_region(int region, Material m) {
    if (!(m.youngs > 0)) throw ConfigError("Young modulus must be positive");
    if (!(m.poisson >= 0 && m.poisson < 0.5))
      throw ConfigError("Poisson ratio must lie in [0, 0.5)");
    regions_[region] = m;
  }

  const Material& at_region(int region) const {
    auto it = regions_.find(region);
    if (it == regions_.end())
      throw ConfigError("no material defined for region " + std::to_string(region));
    return it->second;
  }

  // All mesh regions must be covered before assembly.
  void require_covers(const TriMesh& mesh) const {
    for (int c = 0; c < mesh.cell_count(); ++c) at_region(mesh.flags(c).region);
  }

  const std::map<int, Material>& regions() const { return regions_; }

 private:
  std::map<int, Material> regions_;
};

// Fiber pre-stress: constant unit direction per cell (only meaningful on
// cells flagged in_omega_a), tension T and activation level beta. The
// per-cell storage is tied to one mesh generation; remap_fibers carries it
// through refinement so the boundary value problem itself never changes.
struct ActivationSpec {
  double tension = 0.0;  // T, MPa
  double beta = 0.0;     // in [0, 1]
  std::vector<Vec2> fiber;  // per cell; unit vectors on omega_A cells

  double stress_scale() const { return beta * tension; }
};

inline void validate_activation(const ActivationSpec& act, const TriMesh& mesh) {
  if (!(act.tension >= 0)) throw ConfigError("fiber tension must be nonnegative");
  if (!(act.beta >= 0 && act.beta <= 1)) throw ConfigError("activation beta must lie in [0, 1]");
  bool any_active = false;
  for (int c = 0; c < mesh.cell_count(); ++c)
    if (mesh.flags(c).in_omega_a) any_active = true;
  if (!any_active) return;
  if (act.fiber.size() != static_cast<size_t>(mesh.cell_count()))
    throw ConfigError("fiber direction list does not match the mesh cell count");
  for (int c = 0; c < mesh.cell_count(); ++c)
    if (mesh.flags(c).in_omega_a && std::abs(act.fiber[c].norm() - 1.0) > 1e-12)
      throw ConfigError("non-unit fiber direction on an active cell");
}

// Children inherit the parent's fiber direction verbatim.
inline ActivationSpec remap_fibers(const ActivationSpec& act, const std::vector<int>& parent) {
  ActivationSpec out;
  out.tension = act.tension;
  out.beta = act.beta;
  if (!act.fiber.empty()) {
    out.fiber.resize(parent.size());
    for (size_t c = 0; c < parent.size(); ++c) out.fiber[c] = act.fiber[parent[c]];
  }
  return out;
}

enum class QoiVariant { J1, J2 };  // J1: integrated u_x+u_y; J2: integrated div u

struct QoISpec {
  QoiVariant variant = QoiVariant::J1;
};

inline QoiVariant parse_qoi(const std::string& s) {
  if (s == "J1") return QoiVariant::J1;
  if (s == "J2") return QoiVariant::J2;
  throw ConfigError("unknown QoI '" + s + "' (expected J1 or J2)");
}

inline const char* qoi_name(QoiVariant v) { return v == QoiVariant::J1 ? "J1" : "J2"; }

}  // namespace goaladapt
