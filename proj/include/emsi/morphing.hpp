#pragma once

#include <span>

#include "emsi/fem.hpp"
#include "emsi/mesh.hpp"

namespace emsi {

/// Simplex triangulation used only to carry mesh motion; its quality is
/// irrelevant, any valid covering of the anchor hull works.
struct Triangulation {
  int dim = 2;
  std::vector<Vec3> points;
  std::vector<std::array<int, 4>> simplices;  // dim+1 valid ids
  std::vector<std::array<int, 4>> neighbors;  // across face opposite local node, -1 on hull
};

/// Incremental insertion (Bowyer-Watson) with cavity repair for the
/// degenerate cospherical configurations structured grids produce.
Triangulation delaunay(std::span<const Vec3> pts, int dim);

struct MorphOperator {
  int dim = 2;
  std::vector<int> fixed_ids;  // body nodes plus domain boundary nodes
  std::vector<int> free_ids;   // air interior
  Triangulation tris;          // over the initial fixed positions
  std::vector<int> containing_simplex;           // per free node
  std::vector<std::array<double, 4>> bary_weights;  // per free node, sum 1
  int n_total_nodes = 0;
};

/// Anchor set = material nodes plus domain-boundary nodes; locates every
/// remaining node in the anchor triangulation.  Free nodes outside the anchor
/// hull beyond tolerance are an error.
MorphOperator build_morph(const Mesh& mesh, const SubMeshMap& map);

/// New coordinates for all nodes: fixed ids take new_fixed_positions exactly
/// (indexed like fixed_ids), free nodes are barycentric interpolations.
std::vector<Vec3> morph(const MorphOperator& op, std::span<const Vec3> new_fixed_positions,
                        std::span<const Vec3> current);

/// w = (X' - X)/dt as a 3-component nodal field.
Field mesh_velocity(const Mesh& mesh, std::span<const Vec3> Xnew, std::span<const Vec3> Xold,
                    double dt);

struct QualityReport {
  double min_scaled_jacobian = 1.0;  // min over cells of volume / reference volume
  int inverted_cells = 0;
};

/// Per-cell signed volume ratio against reference volumes captured before
/// morphing started.
QualityReport quality_report(const Mesh& mesh, std::span<const double> ref_volumes);

std::vector<double> cell_volumes(const Mesh& mesh);

}  // namespace emsi
