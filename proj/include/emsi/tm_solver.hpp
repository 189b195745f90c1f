#pragma once

#include "emsi/domain.hpp"
#include "emsi/fem.hpp"

namespace emsi {

/// Thermomechanical unknowns on the material submesh (reference placement)
/// plus the electromagnetic inputs pulled from the Eulerian solve.
struct TMState {
  const Mesh* mesh = nullptr;  // material submesh, coordinates stay at X
  Field u;                     // m, 3 components with u0/u00
  Field T;                     // K, history in coeffs0

  // electromagnetic fields sampled at material nodes
  Field E, B, E0, B0;  // 3 components
  Field q_total;       // C/m^3
  Field Jtot, P, P0, dBdt;

  TMState(const Mesh& m, double T_init);
};

struct TractionLoad {
  std::vector<AssemblyFacet> facets;
  std::function<Vec3(const Vec3&)> value;  // traction at a reference position, Pa
};

struct ConvectionLoad {
  std::vector<AssemblyFacet> facets;
  double h = 0.0;      // J/(s m^2 K)
  double T_ref = 293.15;
};

struct TMOptions {
  double dt = 1.0;
  bool static_mode = false;   // drop inertia resp. the entropy rate
  double load_scale = 1.0;    // ramp factor on tractions, body force, EM force
  int ramp_increments = 10;   // static preload ramping
  NewtonOptions newton;
  Vec3 body_force = Vec3::Zero();  // m/s^2
  double radiant_heat = 0.0;       // W/kg
};

/// Electromagnetic force density in the Lagrangean frame (Minkowski choice):
/// J F_i = J q E_i + J (Jtot x B)_i - J ((P-P0)/dt x B)_i - J (P x dB/dt)_i
Vec3 em_force_density(double q_total, const Vec3& E, const Vec3& Jtot, const Vec3& B,
                      const Vec3& P, const Vec3& P0, const Vec3& dBdt, double dt, double Jdet);

/// Weak form for the displacement: inertia + J F^-1 sigma : grad dU - loads,
/// with the traction term entering so that positive traction along the
/// outward normal stretches the body.
SparseSystem residual_u(const TMState& st, const MaterialSet& mats,
                        const std::vector<TractionLoad>& tractions, const TMOptions& opts,
                        const DirichletBC& bc);

/// Weak form for the temperature: rho0 (eta - eta0) dT - dt (Q/T).grad dT
/// - dt rho0 (r/T) dT + dt (Q/T^2).grad T dT - dt (J/T) Escr.Jfr dT plus the
/// convective interface term dt h (T - T_ref)/T dT.
SparseSystem residual_T(const TMState& st, const MaterialSet& mats,
                        const std::vector<ConvectionLoad>& convection, const TMOptions& opts,
                        const DirichletBC& bc);

NewtonReport solve_displacement(TMState& st, const MaterialSet& mats,
                                const std::vector<TractionLoad>& tractions, TMOptions opts,
                                const DirichletBC& bc);

NewtonReport solve_temperature(TMState& st, const MaterialSet& mats,
                               const std::vector<ConvectionLoad>& convection,
                               const TMOptions& opts, const DirichletBC& bc);

/// Static solve with the loads ramped in equal increments.
NewtonReport static_preload(TMState& st, const MaterialSet& mats,
                            const std::vector<TractionLoad>& tractions, TMOptions opts,
                            const DirichletBC& bc);

}  // namespace emsi
