#pragma once

#include <span>
#include <string>
#include <vector>

#include "emsi/tensor.hpp"

namespace emsi {

/// Unstructured simplex mesh (triangles in 2D, tetrahedra in 3D) with region
/// markers per cell and integer markers on an explicit facet list.  Node
/// coordinates are stored with three components; the third is zero in 2D.
struct Mesh {
  int dim = 3;
  std::vector<Vec3> nodes;
  std::vector<int> cells;        // (dim+1) ids per cell
  std::vector<int> cell_region;  // one marker per cell
  std::vector<int> facet_nodes;  // dim ids per facet
  std::vector<int> facet_marker;
  int reordered_cells = 0;  // cells flipped by the loader to restore positive volume

  int n_nodes() const { return static_cast<int>(nodes.size()); }
  int n_cells() const { return static_cast<int>(cell_region.size()); }
  int n_facets() const { return static_cast<int>(facet_marker.size()); }
  int nodes_per_cell() const { return dim + 1; }
  int nodes_per_facet() const { return dim; }

  std::span<const int> cell(int c) const {
    return {cells.data() + static_cast<size_t>(c) * (dim + 1), static_cast<size_t>(dim + 1)};
  }
  std::span<int> cell(int c) {
    return {cells.data() + static_cast<size_t>(c) * (dim + 1), static_cast<size_t>(dim + 1)};
  }
  std::span<const int> facet(int f) const {
    return {facet_nodes.data() + static_cast<size_t>(f) * dim, static_cast<size_t>(dim)};
  }

  bool has_facet_marker(int marker) const;
  bool has_region(int marker) const;
};

/// Geometry of one cell under the current nodal coordinates.
struct CellGeometry {
  double volume = 0.0;
  Mat3 jacobian = Mat3::Identity();   // reference map d x / d xi (third column e_z in 2D)
  Mat3 jac_inv = Mat3::Identity();
  std::array<Vec3, 4> grad_shape{};   // P1 shape-function gradients, dim+1 valid
  std::array<Vec3, 4> facet_normal{}; // outward unit normal of facet opposite node i
  std::array<double, 4> facet_area{};
};

/// Throws on degenerate cells with a condition-number report.
CellGeometry cell_geometry(const Mesh& mesh, int cell);

/// Signed volume from the stored node ordering (no validation).
double signed_cell_volume(const Mesh& mesh, int cell);

Mesh load_mesh(const std::string& path);
void save_mesh(const Mesh& mesh, const std::string& path);

/// Validates connectivity and volumes; reorders negative cells, throws on
/// degenerate ones.  Called by load_mesh and by the mesh generators.
void finalize_mesh(Mesh& mesh);

struct SubMeshMap {
  Mesh child;
  std::vector<int> parent_node_of_child;
  std::vector<int> parent_cell_of_child;
  std::vector<int> child_node_of_parent;  // -1 where the parent node is not in the child
};

SubMeshMap extract_submesh(const Mesh& mesh, int region);
SubMeshMap extract_submesh(const Mesh& mesh, const std::vector<int>& regions);

struct InterfaceFacet {
  int cell_in = -1;   // parent cell inside the material region
  int cell_out = -1;  // parent cell outside
  std::array<int, 3> nodes{-1, -1, -1};  // parent node ids, dim valid
  Vec3 normal = Vec3::Zero();            // unit, points from material into air
  double area = 0.0;
};

/// Facets of the extracted region that sit between a material cell and an
/// outside cell; facets on the domain boundary are not included.
std::vector<InterfaceFacet> interface_facets(const Mesh& parent, const SubMeshMap& map);

/// Node ids lying on the domain boundary (facets with a single adjacent cell).
std::vector<int> boundary_nodes(const Mesh& mesh);

/// Resolves a marked facet to its adjacent cells (cell_out = -1 on the
/// domain boundary).  Order follows the mesh facet list.
struct MarkedFacet {
  int facet = -1;
  int cell_in = -1;
  int cell_out = -1;
  Vec3 normal = Vec3::Zero();  // outward from cell_in
  double area = 0.0;
};
std::vector<MarkedFacet> resolve_facets(const Mesh& mesh, const std::vector<int>& markers);

Vec3 facet_normal_area(const Mesh& mesh, std::span<const int> fnodes, double& area);

}  // namespace emsi
