#pragma once

#include <optional>
#include <string>

#include "emsi/tensor.hpp"

namespace emsi {

/// Fully coupled linear material: thermoelastic, piezoelectric/-magnetic,
/// magnetoelectric, dielectric/magnetic susceptibility, plus the
/// non-equilibrium transport coefficients.  All values SI.
struct LinearMaterial {
  double rho0 = 1000.0;       // kg/m^3
  Rank4 C;                    // Pa, acts on displacement-gradient pairs
  Mat3 alpha = Mat3::Zero();  // 1/K thermal expansion
  Rank3 Ttilde;               // C/m^2 piezoelectric coupling, T~_{kij}
  Rank3 Stilde;               // A/m piezomagnetic coupling
  Mat3 Rtilde = Mat3::Zero(); // magnetoelectric coupling
  Mat3 chi_el = Mat3::Zero(); // electric susceptibility
  Mat3 chi_mag = Mat3::Zero();
  Mat3 mu_mag_inv = Mat3::Identity() / mu0;  // inverse magnetic permeability
  double c_heat = 1000.0;     // J/(kg K)
  double kappa = 0.0;         // W/(m K), >= 0
  double sigma_el = 0.0;      // S/m, >= 0
  double peltier = 0.0;       // V/K thermoelectric constant
  double h_conv = 0.0;        // J/(s m^2 K), default for interface convection
  double T_ref = 293.15;      // K

  void validate() const;
};

/// Magneto-hyperelastic elastomer model: neo-Hookean/Mooney split driven by
/// the deviatoric invariants with magnetic stiffening through tanh(I4/Bs)
/// and the coupling invariants I4, I6, plus a volumetric penalty.
struct MagnetoHyperelasticMaterial {
  double mu_shear = 260e3;   // Pa
  double B_s = 1.0;          // T^2 saturation constant
  double alpha_tilde = 0.3;
  double n = 0.3;
  double q_coef = 1.0 / mu0;
  double r_coef = 1.0 / mu0;
  double kappa_vol = 100.0 * 260e3;  // Pa, volumetric penalty
  double rho0 = 1100.0;
  // thermal bookkeeping when a temperature solve runs on this material
  double c_heat = 1500.0;
  double kappa = 0.2;
  double T_ref = 293.15;

  void validate() const;
};

/// Point state the constitutive functions consume.
struct StateSample {
  double T = 293.15;
  Mat3 gradu = Mat3::Zero();  // du/dX
  Mat3 F = Mat3::Identity();
  double Jdet = 1.0;
  Vec3 E = Vec3::Zero();      // V/m
  Vec3 B = Vec3::Zero();      // T
  Vec3 Escr = Vec3::Zero();   // co-moving electric field E + v x B
  Vec3 gradT = Vec3::Zero();  // K/m, dT/dX
  Vec3 v = Vec3::Zero();      // m/s

  static StateSample reference(double T_ref) {
    StateSample s;
    s.T = T_ref;
    return s;
  }
  void set_gradu(const Mat3& g) {
    gradu = g;
    F = g + Mat3::Identity();
    Jdet = F.determinant();
  }
};

struct LinearResponse {
  double eta = 0.0;  // J/(kg K)
  Mat3 N = Mat3::Zero();  // Pa nominal stress, N(j,i)
  Vec3 P = Vec3::Zero();  // C/m^2
  Vec3 M = Vec3::Zero();  // A/m magnetic polarization
};

/// The four coupled constitutive lines of the linear model, evaluated
/// verbatim including the (2 - 1/J) factors and the logarithmic entropy.
LinearResponse eval_linear(const LinearMaterial& mat, const StateSample& s);

struct MagnetoHyperelasticResponse {
  double psi = 0.0;  // J/m^3 stored energy density
  Mat3 N = Mat3::Zero();
  Vec3 M = Vec3::Zero();
};

MagnetoHyperelasticResponse eval_magnetohyperelastic(const MagnetoHyperelasticMaterial& mat,
                                                     const Mat3& F, const Vec3& B);

/// Energy density only (used by finite-difference oracles).
double mhe_energy(const MagnetoHyperelasticMaterial& mat, const Mat3& F, const Vec3& B);

struct Fluxes {
  Vec3 Q = Vec3::Zero();    // W/m^2 referential heat flux
  Vec3 Jfr = Vec3::Zero();  // A/m^2 free current
};

/// Q_i = -kappa dT/dX_i + sigma*pi*T*J*Escr_i,
/// Jfr_i = sigma*pi dT/dX_i + sigma Escr_i.
Fluxes eval_fluxes(const LinearMaterial& mat, const Vec3& gradT, const Vec3& Escr, double Jdet,
                   double T);

/// sigma_{ji} = J^-1 F_{jk} N_{ki} + P_j E_i - M_i B_j
Mat3 cauchy_stress(const Mat3& N, const Mat3& F, double Jdet, const Vec3& P, const Vec3& E,
                   const Vec3& M, const Vec3& B);

/// Voigt 6x6 -> rank-4 on displacement-gradient pairs with minor symmetries.
Rank4 voigt_to_full(const Mat6& C_voigt);

/// C_IJ = (S_JI)^-1
Mat6 compliance_to_stiffness(const Mat6& S_voigt);

/// Ttilde_{mij} = C_{ijkl} d_{mkl}; d given in Voigt layout on the last pair
/// (engineering shear convention: tensor d halves the off-diagonal slots).
Rank3 piezo_d_to_T(const Rank4& C, const Mat36& d);

/// Isotropic Voigt stiffness from the Lame constants.
Mat6 isotropic_stiffness(double lambda, double mu);

/// lambda = (E-2G)G/(3G-E) with G = E/(2(1+nu)).
void lame_from_youngs(double E, double nu, double& lambda, double& mu);

}  // namespace emsi
