#include "emsi/constitutive.hpp"

#include <cmath>
#include <stdexcept>

namespace emsi {

void LinearMaterial::validate() const {
  if (kappa < 0.0) throw std::runtime_error("material: kappa must be >= 0");
  if (sigma_el < 0.0) throw std::runtime_error("material: sigma_el must be >= 0");
  if (T_ref <= 0.0) throw std::runtime_error("material: T_ref must be > 0");
  if (rho0 <= 0.0) throw std::runtime_error("material: rho0 must be > 0");
}

void MagnetoHyperelasticMaterial::validate() const {
  if (mu_shear <= 0.0) throw std::runtime_error("material: mu_shear must be > 0");
  if (B_s <= 0.0) throw std::runtime_error("material: B_s must be > 0");
  if (kappa_vol < 0.0) throw std::runtime_error("material: kappa_vol must be >= 0");
  if (rho0 <= 0.0) throw std::runtime_error("material: rho0 must be > 0");
}

LinearResponse eval_linear(const LinearMaterial& mat, const StateSample& s) {
  if (s.T <= 0.0) throw std::runtime_error("eval_linear: non-positive temperature");
  if (s.Jdet <= 0.0) throw std::runtime_error("eval_linear: non-positive det F");

  const double dT = s.T - mat.T_ref;           // subtract before multiplying
  const Mat3 G = s.gradu;                      // F - I
  const Mat3 Gt = G - mat.alpha * dT;          // -alpha dT + du/dX
  const double v0 = 1.0 / mat.rho0;
  const double Jin = 1.0 / s.Jdet;
  const double two_m_Jin = 2.0 - Jin;

  LinearResponse r;

  // eta = c ln(T/Tref) + v0 C_{lkij} a_ij du_k/dX_l - v0 T~_{kij} a_ij E_k
  //       - v0 (2-1/J) S~_{kij} a_ij B_k
  const Mat3 CA = mat.C.apply(mat.alpha);  // CA(l,k) = C_{lkij} alpha_ij
  double eta = mat.c_heat * std::log(s.T / mat.T_ref);
  for (int l = 0; l < 3; ++l)
    for (int k = 0; k < 3; ++k) eta += v0 * CA(l, k) * G(k, l);
  const Vec3 Ta = mat.Ttilde.contract_right(mat.alpha);
  const Vec3 Sa = mat.Stilde.contract_right(mat.alpha);
  eta -= v0 * Ta.dot(s.E);
  eta -= v0 * two_m_Jin * Sa.dot(s.B);
  r.eta = eta;

  // N_ji = C_{jikl} (-a_kl dT + du_k/dX_l) - T~_{kij} E_k - (2-1/J) S~_{kij} B_k
  r.N = mat.C.apply(Gt);
  const Mat3 TE = mat.Ttilde.contract_left(s.E);  // TE(i,j) = T~_{kij} E_k
  const Mat3 SB = mat.Stilde.contract_left(s.B);
  for (int j = 0; j < 3; ++j)
    for (int i = 0; i < 3; ++i) r.N(j, i) -= TE(i, j) + two_m_Jin * SB(i, j);

  // P_i = 1/J T~_{ikl} (-a dT + du/dX) + eps0 chi_ik E_k + (2-1/J) R~_{ki} B_k
  r.P = Jin * mat.Ttilde.contract_right(Gt) + eps0 * mat.chi_el * s.E +
        two_m_Jin * mat.Rtilde.transpose() * s.B;

  // M_i = 1/J S~_{ikl} (-a dT + du/dX) + R~_{ik} E_k
  //       + (2-1/J) (mu^-1)_{ij} chi^mag_{jk} B_k
  r.M = Jin * mat.Stilde.contract_right(Gt) + mat.Rtilde * s.E +
        two_m_Jin * (mat.mu_mag_inv * (mat.chi_mag * s.B));

  return r;
}

double mhe_energy(const MagnetoHyperelasticMaterial& mat, const Mat3& F, const Vec3& B) {
  const double J = F.determinant();
  if (J <= 0.0) throw std::runtime_error("mhe_energy: non-positive det F");
  const Mat3 C = F.transpose() * F;
  const double I1 = C.trace();
  const double I2 = 0.5 * (I1 * I1 - (C * C).trace());
  const double I4 = B.squaredNorm();
  const double I6 = (C * B).squaredNorm();
  const double I1b = std::pow(J, -2.0 / 3.0) * I1;
  const double I2b = std::pow(J, -4.0 / 3.0) * I2;
  const double g = 1.0 + mat.alpha_tilde * std::tanh(I4 / mat.B_s);
  const double mech = (1.0 + mat.n) * (I1b - 3.0) + (1.0 - mat.n) * (I2b - 3.0);
  return 0.25 * mat.mu_shear * g * mech + mat.q_coef * I4 + mat.r_coef * I6 +
         0.5 * mat.kappa_vol * (J - 1.0) * (J - 1.0);
}

MagnetoHyperelasticResponse eval_magnetohyperelastic(const MagnetoHyperelasticMaterial& mat,
                                                     const Mat3& F, const Vec3& B) {
  const double J = F.determinant();
  if (J <= 0.0) throw std::runtime_error("eval_magnetohyperelastic: non-positive det F");
  const Mat3 C = F.transpose() * F;
  const Mat3 Finv = F.inverse();
  const Mat3 FinvT = Finv.transpose();
  const double I1 = C.trace();
  const double I2 = 0.5 * (I1 * I1 - (C * C).trace());
  const double I4 = B.squaredNorm();
  const Vec3 CB = C * B;
  const double I6 = CB.squaredNorm();
  const double J23 = std::pow(J, -2.0 / 3.0);
  const double J43 = std::pow(J, -4.0 / 3.0);
  const double I1b = J23 * I1;
  const double I2b = J43 * I2;

  const double th = std::tanh(I4 / mat.B_s);
  const double g = 1.0 + mat.alpha_tilde * th;
  const double mech = (1.0 + mat.n) * (I1b - 3.0) + (1.0 - mat.n) * (I2b - 3.0);

  MagnetoHyperelasticResponse r;
  r.psi = 0.25 * mat.mu_shear * g * mech + mat.q_coef * I4 + mat.r_coef * I6 +
          0.5 * mat.kappa_vol * (J - 1.0) * (J - 1.0);

  // dPsi/dF, assembled from the invariant derivatives
  const Mat3 dI1 = 2.0 * F;
  const Mat3 dI2 = 2.0 * I1 * F - 2.0 * F * C;
  const Mat3 dJ = J * FinvT;
  const Mat3 dI1b = J23 * dI1 - (2.0 / 3.0) * I1b * FinvT;
  const Mat3 dI2b = J43 * dI2 - (4.0 / 3.0) * I2b * FinvT;
  const Mat3 S6 = CB * B.transpose() + B * CB.transpose();
  const Mat3 dI6 = 2.0 * F * S6;

  Mat3 dPsi = 0.25 * mat.mu_shear * g * ((1.0 + mat.n) * dI1b + (1.0 - mat.n) * dI2b) +
              mat.r_coef * dI6 + mat.kappa_vol * (J - 1.0) * dJ;
  // N_ji = dPsi/dF_ij
  r.N = dPsi.transpose();

  // M = -1/J dPsi/dB
  const double sech2 = 1.0 - th * th;
  Vec3 dPsidB = 0.25 * mat.mu_shear * mat.alpha_tilde * sech2 * (2.0 / mat.B_s) * mech * B +
                2.0 * mat.q_coef * B + 2.0 * mat.r_coef * (C * CB);
  r.M = -dPsidB / J;
  return r;
}

Fluxes eval_fluxes(const LinearMaterial& mat, const Vec3& gradT, const Vec3& Escr, double Jdet,
                   double T) {
  if (T <= 0.0) throw std::runtime_error("eval_fluxes: non-positive temperature");
  Fluxes f;
  f.Q = -mat.kappa * gradT + mat.sigma_el * mat.peltier * T * Jdet * Escr;
  f.Jfr = mat.sigma_el * mat.peltier * gradT + mat.sigma_el * Escr;
  return f;
}

Mat3 cauchy_stress(const Mat3& N, const Mat3& F, double Jdet, const Vec3& P, const Vec3& E,
                   const Vec3& M, const Vec3& B) {
  if (Jdet <= 0.0) throw std::runtime_error("cauchy_stress: non-positive det F");
  Mat3 s = (F * N) / Jdet;  // s(j,i) = 1/J F_jk N_ki
  for (int j = 0; j < 3; ++j)
    for (int i = 0; i < 3; ++i) s(j, i) += P[j] * E[i] - M[i] * B[j];
  return s;
}

Rank4 voigt_to_full(const Mat6& Cv) {
  if ((Cv - Cv.transpose()).cwiseAbs().maxCoeff() >
      1e-12 * std::max(1.0, Cv.cwiseAbs().maxCoeff()))
    throw std::runtime_error("voigt_to_full: Voigt matrix is not symmetric");
  Rank4 out;
  out.voigt_symmetric = true;
  for (int j = 0; j < 3; ++j)
    for (int i = 0; i < 3; ++i)
      for (int k = 0; k < 3; ++k)
        for (int l = 0; l < 3; ++l) out(j, i, k, l) = Cv(voigt_index(j, i), voigt_index(k, l));
  return out;
}

Mat6 compliance_to_stiffness(const Mat6& S) {
  Eigen::FullPivLU<Mat6> lu(S.transpose());
  if (!lu.isInvertible()) throw std::runtime_error("compliance_to_stiffness: singular compliance");
  return lu.inverse();
}

Rank3 piezo_d_to_T(const Rank4& C, const Mat36& d) {
  // expand Voigt d to tensor form; engineering shear halves the off-diagonals
  Rank3 dt;
  for (int m = 0; m < 3; ++m)
    for (int I = 0; I < 6; ++I) {
      auto [k, l] = voigt_pairs[I];
      double v = d(m, I) * (k == l ? 1.0 : 0.5);
      dt(m, k, l) = v;
      dt(m, l, k) = v;
    }
  Rank3 T;
  for (int m = 0; m < 3; ++m)
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        double s = 0.0;
        for (int k = 0; k < 3; ++k)
          for (int l = 0; l < 3; ++l) s += C(i, j, k, l) * dt(m, k, l);
        T(m, i, j) = s;
      }
  return T;
}

Mat6 isotropic_stiffness(double lambda, double mu) {
  Mat6 C = Mat6::Zero();
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) C(i, j) = lambda;
    C(i, i) = lambda + 2.0 * mu;
    C(i + 3, i + 3) = mu;
  }
  return C;
}

void lame_from_youngs(double E, double nu, double& lambda, double& mu) {
  double G = E / (2.0 * (1.0 + nu));
  lambda = (E - 2.0 * G) * G / (3.0 * G - E);
  mu = G;
}

}  // namespace emsi
