#pragma once

#include <map>
#include <string>
#include <vector>

#include "emsi/constitutive.hpp"

namespace emsi {

/// Material attached to one mesh region.  Regions without an entry (or with
/// kind Vacuum) carry only the aether response.
struct RegionMaterial {
  enum class Kind { Vacuum, Linear, MagnetoHyperelastic };
  Kind kind = Kind::Vacuum;
  std::string name = "air";
  LinearMaterial lin;
  MagnetoHyperelasticMaterial mhe;

  bool is_material() const { return kind != Kind::Vacuum; }
  double rho0() const { return kind == Kind::MagnetoHyperelastic ? mhe.rho0 : lin.rho0; }
  double T_ref() const { return kind == Kind::MagnetoHyperelastic ? mhe.T_ref : lin.T_ref; }
};

struct MaterialSet {
  std::map<int, RegionMaterial> by_region;

  const RegionMaterial* find(int region) const {
    auto it = by_region.find(region);
    return it == by_region.end() ? nullptr : &it->second;
  }
  bool is_material(int region) const {
    const RegionMaterial* m = find(region);
    return m && m->is_material();
  }
  std::vector<int> material_regions() const {
    std::vector<int> out;
    for (const auto& [r, m] : by_region)
      if (m.is_material()) out.push_back(r);
    return out;
  }
};

}  // namespace emsi
