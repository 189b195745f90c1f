#pragma once

#include "emsi/domain.hpp"
#include "emsi/fem.hpp"
#include "emsi/mesh.hpp"

namespace emsi {

/// Electromagnetic unknowns and nodal source caches on the whole-domain mesh.
/// Cached polarization/current fields vanish identically outside the material
/// region; the structural caches (gradu, T, gradT, v) hold the thermo-
/// mechanical state pushed in by the coupling driver.
struct EMState {
  const Mesh* mesh = nullptr;
  Field phi;  // V
  Field A;    // T m, 3 components with A0/A00 histories

  // recovered fields (nodal, full mesh)
  Field E, B, E0, B0;

  // bound-source caches, zero outside material
  Field P, P0, M, curlM, Jfr, q_free, q_total, Jtot, dBdt;

  // thermomechanical state on material nodes of the full mesh
  Field gradu;    // 9 components, row-major du_i/dX_j at 3*i+j
  Field T_nodal;  // K; T_ref outside material
  Field gradT;    // 3 components, dT/dX
  Field v;        // material velocity, zero outside

  explicit EMState(const Mesh& m);
};

struct EMOptions {
  double dt = 1.0;
  bool static_mode = false;  // drop the A inertia and the D-D0 time terms
  NewtonOptions newton{1e-14, 1e-10, 25, 12};
};

/// E = -grad(phi) - (A - A0)/dt, B = curl A, as nodal fields through the
/// lumped gradient projection.  cell_mask restricts the averaging stencil
/// (material-side recovery for the coupling pull).
void recover_EB(const Field& phi, const Field& A, const Field& A0, double dt, Field& E, Field& B,
                std::span<const char> cell_mask = {});

/// Recompute the cached nodal sources P, M, curl M, Jfr, q_free, q_total,
/// Jtot from the current caches E/B and the thermomechanical state.
void bound_sources(EMState& st, const MaterialSet& mats, const SubMeshMap& map, double dt);

/// Weak form for the electric potential: volume term
/// (-(D-D0) - dt J) . grad(dphi) plus the material-air interface jump term
/// dt n.(Jfr + curl M) dphi, with D = eps0 E at the current phi iterate.
SparseSystem residual_phi(const EMState& st, const MaterialSet& mats,
                          const std::vector<AssemblyFacet>& interface, const EMOptions& opts,
                          const DirichletBC& bc);

/// Weak form for the magnetic potential: -eps0 (A-2A0+A00)/dt^2 . dA
/// - 1/mu0 grad A : grad dA + Jfr . dA + (P-P0)/dt . dA - (M x) . grad dA,
/// with E(A), B(A) live at the current iterate and phi frozen.
SparseSystem residual_A(const EMState& st, const MaterialSet& mats, const EMOptions& opts,
                        const DirichletBC& bc);

struct EMStepReport {
  NewtonReport phi;
  NewtonReport A;
};

/// One staggered EM substep: Newton on phi, then on A, cross terms frozen at
/// the latest values.  Histories are not rotated here.
EMStepReport solve_em_step(EMState& st, const MaterialSet& mats,
                           const std::vector<AssemblyFacet>& interface, const EMOptions& opts,
                           const DirichletBC& bc_phi, const DirichletBC& bc_A);

struct ChargeBalance {
  double assembled_sum = 0.0;    // sum of all unconstrained residual entries
  double interface_source = 0.0; // direct quadrature of the interface jump term
  double charge_rate = 0.0;      // sum_c vol_c (q_c - q0_c)/dt (cellwise div of eps0 E)
  double dominant = 0.0;         // magnitude scale for the relative check
  double residual() const { return assembled_sum - interface_source; }
};

/// Discrete conservation audit for the governing charge balance: the
/// assembled weak form summed against the constant test function must equal
/// the independently integrated interface source (volume contributions
/// telescope by the partition of unity).
ChargeBalance charge_balance(const EMState& st, const MaterialSet& mats,
                             const std::vector<AssemblyFacet>& interface, const EMOptions& opts);

/// Total charge sum_c vol_c div(eps0 E_nodal) and its cellwise distribution.
double total_charge(const EMState& st, std::vector<double>* cellwise = nullptr);

}  // namespace emsi
