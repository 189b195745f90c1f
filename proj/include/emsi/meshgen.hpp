#pragma once

#include <functional>

#include "emsi/mesh.hpp"

namespace emsi {

/// marker callback: (facet midpoint, geometric normal, on domain boundary) ->
/// facet marker, 0 to leave the facet unlisted
using FacetMarkerFn = std::function<int(const Vec3&, const Vec3&, bool)>;
using RegionFn = std::function<int(const Vec3&)>;  // cell centroid -> region

std::vector<double> linspace(double a, double b, int n);

/// structured triangle mesh on the tensor grid xs x ys; every quad is split
/// into four triangles around its center node (crossed pattern)
Mesh rect_mesh(const std::vector<double>& xs, const std::vector<double>& ys,
               const RegionFn& region_of, const FacetMarkerFn& marker_of = nullptr);

/// structured tetrahedral mesh (six tets per hexahedron)
Mesh box_mesh(const std::vector<double>& xs, const std::vector<double>& ys,
              const std::vector<double>& zs, const RegionFn& region_of,
              const FacetMarkerFn& marker_of = nullptr);

/// polar disk mesh of radius R with n_rings rings
Mesh disk_mesh(double radius, int n_rings, const RegionFn& region_of);

}  // namespace emsi
