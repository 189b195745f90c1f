#pragma once

#include <Eigen/Sparse>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "emsi/mesh.hpp"

namespace emsi {

/// Nodal P1 field with two history slots (previous and one before that).
struct Field {
  const Mesh* mesh = nullptr;
  int n_comp = 1;
  Eigen::VectorXd coeffs, coeffs0, coeffs00;

  Field() = default;
  Field(const Mesh& m, int nc, double init = 0.0) : mesh(&m), n_comp(nc) {
    coeffs = Eigen::VectorXd::Constant(static_cast<long>(m.n_nodes()) * nc, init);
    coeffs0 = coeffs;
    coeffs00 = coeffs;
  }

  int n_dof() const { return static_cast<int>(coeffs.size()); }
  double& at(int node, int comp = 0) { return coeffs[static_cast<long>(node) * n_comp + comp]; }
  double at(int node, int comp = 0) const { return coeffs[static_cast<long>(node) * n_comp + comp]; }
  Vec3 vec_at(int node) const {
    Vec3 v = Vec3::Zero();
    for (int c = 0; c < std::min(n_comp, 3); ++c) v[c] = at(node, c);
    return v;
  }
  void rotate_history() {
    coeffs00 = coeffs0;
    coeffs0 = coeffs;
  }
};

struct QuadraturePoint {
  std::array<double, 4> lambda{};  // barycentric coordinates, dim+1 valid
  double weight = 0.0;             // weights sum to 1, scale by cell volume
};

struct QuadratureRule {
  std::vector<QuadraturePoint> points;
  int degree = 0;
};

/// Volume rules on the reference simplex; degree 2 is the assembly default.
const QuadratureRule& volume_rule(int dim, int degree = 2);
/// Facet rules (segment in 2D, triangle in 3D).
const QuadratureRule& facet_rule(int dim, int degree = 2);

struct DirichletBC {
  std::vector<std::pair<int, double>> entries;  // dof -> prescribed value

  void add(int dof, double value) { entries.push_back({dof, value}); }
  void apply_to(Field& f) const {
    for (auto [dof, v] : entries) f.coeffs[dof] = v;
  }
};

/// Assembled residual and Jacobian for one Newton step of one weak form.
struct SparseSystem {
  Eigen::VectorXd residual;
  Eigen::SparseMatrix<double> jacobian;
  std::vector<std::pair<int, double>> constraints;
};

/// Thrown by kernels when the trial state is outside the admissible set
/// (negative Jacobian determinant, non-positive temperature); the Newton
/// driver reacts by damping instead of aborting.
struct InadmissibleState : std::runtime_error {
  int cell;
  InadmissibleState(int c, const std::string& what)
      : std::runtime_error("cell " + std::to_string(c) + ": " + what), cell(c) {}
};

/// Per-cell context handed to element kernels.  `active` holds the nodal
/// values of the unknown field being solved (n_comp x nodes_per_cell); the
/// assembler finite-differences the kernel with respect to these entries.
struct ElemCtx {
  const Mesh* mesh = nullptr;
  int cell = -1;
  int region = 0;
  std::array<int, 4> nodes{};
  CellGeometry geo;
  int n_comp = 1;
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic> active;  // n_comp x (dim+1)

  int dim() const { return mesh->dim; }
  int n_cell_nodes() const { return mesh->dim + 1; }

  /// value of the active field at barycentric point
  Eigen::VectorXd value(const QuadraturePoint& q) const {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(n_comp);
    for (int n = 0; n < n_cell_nodes(); ++n) v += q.lambda[n] * active.col(n);
    return v;
  }
  /// gradient of the active field: (comp, xyz), cell-constant for P1
  Eigen::Matrix<double, Eigen::Dynamic, 3> gradient() const {
    Eigen::Matrix<double, Eigen::Dynamic, 3> g =
        Eigen::Matrix<double, Eigen::Dynamic, 3>::Zero(n_comp, 3);
    for (int n = 0; n < n_cell_nodes(); ++n)
      g += active.col(n) * geo.grad_shape[n].transpose();
    return g;
  }
  Vec3 position(const QuadraturePoint& q) const {
    Vec3 x = Vec3::Zero();
    for (int n = 0; n < n_cell_nodes(); ++n) x += q.lambda[n] * mesh->nodes[nodes[n]];
    return x;
  }
};

/// A facet integral contribution tied to one adjacent cell.  Shape functions
/// are the cell's P1 functions restricted to the facet; normal and area are
/// computed from the current nodal coordinates at assembly time.
struct FacetCtx {
  const ElemCtx* cell_ctx = nullptr;
  std::array<int, 3> facet_nodes{-1, -1, -1};  // global ids, dim valid
  std::array<int, 3> local_nodes{-1, -1, -1};  // local index in the cell
  Vec3 normal = Vec3::Zero();                  // outward from the carrying cell
  double area = 0.0;

  std::array<double, 4> cell_lambda(const QuadraturePoint& q, int dim) const {
    std::array<double, 4> l{0, 0, 0, 0};
    for (int k = 0; k < dim; ++k) l[local_nodes[k]] = q.lambda[k];
    return l;
  }
};

using CellKernel = std::function<void(const ElemCtx&, Eigen::VectorXd&)>;
using FacetKernel = std::function<void(const ElemCtx&, const FacetCtx&, Eigen::VectorXd&)>;

/// Facet tied to the cell whose trace is integrated (the material side on
/// interfaces, the inside cell on boundaries).
struct AssemblyFacet {
  int cell = -1;
  std::array<int, 3> nodes{-1, -1, -1};
};

struct FacetJob {
  std::vector<AssemblyFacet> facets;
  FacetKernel kernel;
};

std::vector<AssemblyFacet> to_assembly_facets(const std::vector<MarkedFacet>& facets,
                                              const Mesh& mesh);
std::vector<AssemblyFacet> to_assembly_facets(const std::vector<InterfaceFacet>& facets);

struct AssemblyOptions {
  double fd_step = 1e-7;  // forward differences: step = fd_step * (1 + |value|)
  std::span<const int> cell_order = {};  // optional iteration order (tests)
};

/// Sum of scattered local contributions over cells (and facet jobs), with the
/// local Jacobian taken by forward finite differences of the kernel in the
/// active dofs.  Dirichlet rows are replaced by identity with residual
/// entry = current value - prescribed value.
SparseSystem assemble(const Mesh& mesh, const Field& active, const CellKernel& kernel,
                      const std::vector<FacetJob>& facet_jobs, const DirichletBC& bc,
                      const AssemblyOptions& opts = {});

/// Direct sparse LU; verifies ||J d + r|| <= 1e-10 ||r||.
Eigen::VectorXd solve_linear(const SparseSystem& sys);

struct NewtonOptions {
  double tol_abs = 1e-8;
  double tol_rel = 1e-10;
  int max_iter = 25;
  int max_halvings = 12;
};

struct NewtonReport {
  bool converged = false;
  int iterations = 0;
  std::vector<double> residual_history;
  double final_residual = 0.0;
};

struct SolveError : std::runtime_error {
  NewtonReport report;
  SolveError(const std::string& what, NewtonReport r) : std::runtime_error(what), report(std::move(r)) {}
};

/// Damped Newton on one field: full step first, halving line search on
/// residual increase or inadmissible trial states.  Throws SolveError when
/// max_iter is exceeded.
NewtonReport newton_solve(const std::function<SparseSystem()>& assemble_fn, Field& f,
                          const NewtonOptions& opts = {});

enum class TransferDirection { Pull, Push };

/// Copy nodal coefficients across a submesh map.  Pull: child <- parent,
/// Push: parent <- child.  Entries outside the map are untouched.
void transfer_nodal(const Field& src, Field& dst, const SubMeshMap& map, TransferDirection dir);

/// Volume-weighted average of adjacent cell gradients (lumped L2 projection).
/// Result has n_comp * dim components, component-major: (c, d) -> c*dim + d.
/// `cell_mask` restricts the averaging to flagged cells (empty = all cells).
Field project_gradient(const Field& f, std::span<const char> cell_mask = {});

}  // namespace emsi
