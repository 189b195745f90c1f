#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "emsi/constitutive.hpp"
#include "testutil.hpp"

using namespace emsi;

namespace {

// independent 6x6 inversion (Gauss-Jordan with partial pivoting)
Mat6 invert6_oracle(Mat6 a) {
  Mat6 inv = Mat6::Identity();
  for (int col = 0; col < 6; ++col) {
    int piv = col;
    for (int r = col + 1; r < 6; ++r)
      if (std::abs(a(r, col)) > std::abs(a(piv, col))) piv = r;
    a.row(col).swap(a.row(piv));
    inv.row(col).swap(inv.row(piv));
    double d = a(col, col);
    a.row(col) /= d;
    inv.row(col) /= d;
    for (int r = 0; r < 6; ++r) {
      if (r == col) continue;
      double f = a(r, col);
      a.row(r) -= f * a.row(col);
      inv.row(r) -= f * inv.row(col);
    }
  }
  return inv;
}

Mat6 pzt5h_compliance() {
  const double S11 = 16.5e-12, S12 = -4.78e-12, S13 = -8.45e-12;
  const double S33 = 20.7e-12, S44 = 43.5e-12, S66 = 42.6e-12;
  Mat6 S = Mat6::Zero();
  S(0, 0) = S(1, 1) = S11;
  S(0, 1) = S(1, 0) = S12;
  S(0, 2) = S(2, 0) = S(1, 2) = S(2, 1) = S13;
  S(2, 2) = S33;
  S(3, 3) = S(4, 4) = S44;
  S(5, 5) = S66;
  return S;
}

Mat36 pzt5h_d() {
  const double d33 = 585e-12, d31 = -265e-12, d15 = 730e-12;
  Mat36 d = Mat36::Zero();
  d(2, 0) = d(2, 1) = d31;
  d(2, 2) = d33;
  d(1, 3) = d15;
  d(0, 4) = d15;
  return d;
}

LinearMaterial pzt5h() {
  LinearMaterial m;
  m.rho0 = 7500.0;
  m.C = voigt_to_full(compliance_to_stiffness(pzt5h_compliance()));
  m.Ttilde = piezo_d_to_T(m.C, pzt5h_d());
  m.chi_el = Mat3::Zero();
  m.chi_el(0, 0) = m.chi_el(1, 1) = 3130.0 - 1.0;
  m.chi_el(2, 2) = 3400.0 - 1.0;
  m.alpha = Mat3::Zero();
  m.alpha(0, 0) = m.alpha(1, 1) = 6e-6;
  m.alpha(2, 2) = -4e-6;
  m.c_heat = 350.0;
  m.kappa = 1.1;
  return m;
}

Mat3 random_mat(double scale) {
  Mat3 m;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) m(i, j) = test::uniform(-scale, scale);
  return m;
}

}  // namespace

TEST_CASE("voigt_to_full") {
  SUBCASE("isotropic lambda=0 mu=1 reproduces the Lame identity") {
    Rank4 C = voigt_to_full(isotropic_stiffness(0.0, 1.0));
    CHECK(C(0, 0, 0, 0) == 2.0);
    CHECK(C(0, 1, 0, 1) == 1.0);
    CHECK(C(0, 0, 1, 1) == 0.0);
  }

  SUBCASE("epoxy from Young's modulus and Poisson ratio") {
    double lambda, mu;
    lame_from_youngs(30e9, 0.4, lambda, mu);
    double G = 30e9 / (2.0 * 1.4);
    CHECK(mu == doctest::Approx(G));
    CHECK(lambda == doctest::Approx((30e9 - 2.0 * G) * G / (3.0 * G - 30e9)));
    Rank4 C = voigt_to_full(isotropic_stiffness(lambda, mu));
    CHECK(C(0, 0, 0, 0) == doctest::Approx(lambda + 2.0 * mu));
  }

  SUBCASE("contraction with symmetric strains matches the direct Voigt product") {
    Mat6 Cv;
    for (int i = 0; i < 6; ++i)
      for (int j = 0; j <= i; ++j) Cv(i, j) = Cv(j, i) = test::uniform(-1, 1);
    Rank4 C = voigt_to_full(Cv);
    for (int trial = 0; trial < 10; ++trial) {
      Mat3 r = random_mat(1.0);
      Mat3 eps = 0.5 * (r + r.transpose());
      Eigen::Matrix<double, 6, 1> ev;  // engineering strain
      for (int I = 0; I < 6; ++I) {
        auto [i, j] = voigt_pairs[I];
        ev[I] = (i == j) ? eps(i, j) : 2.0 * eps(i, j);
      }
      Eigen::Matrix<double, 6, 1> sv = Cv * ev;
      Mat3 N = C.apply(eps);
      for (int I = 0; I < 6; ++I) {
        auto [i, j] = voigt_pairs[I];
        CHECK(N(i, j) == doctest::Approx(sv[I]).epsilon(1e-12));
        CHECK(N(j, i) == doctest::Approx(sv[I]).epsilon(1e-12));
      }
    }
  }

  SUBCASE("asymmetric input is rejected") {
    Mat6 Cv = Mat6::Identity();
    Cv(0, 1) = 0.5;
    CHECK_THROWS_AS((void)voigt_to_full(Cv), std::runtime_error);
  }
}

TEST_CASE("compliance_to_stiffness") {
  SUBCASE("identity") {
    CHECK((compliance_to_stiffness(Mat6::Identity()) - Mat6::Identity()).norm() < 1e-14);
  }

  SUBCASE("diagonal compliance inverts elementwise") {
    Mat6 S = Mat6::Zero();
    for (int i = 0; i < 6; ++i) S(i, i) = 1.0 + i;
    Mat6 C = compliance_to_stiffness(S);
    for (int i = 0; i < 6; ++i) CHECK(C(i, i) == doctest::Approx(1.0 / (1.0 + i)).epsilon(1e-14));
  }

  SUBCASE("PZT-5H against the independent inversion oracle") {
    Mat6 S = pzt5h_compliance();
    Mat6 C = compliance_to_stiffness(S);
    Mat6 Cref = invert6_oracle(S);
    CHECK((C - Cref).cwiseAbs().maxCoeff() <= 1e-6 * Cref.cwiseAbs().maxCoeff());
    CHECK(C(2, 2) > 0.0);  // stiffness is positive along the poling axis
  }

  SUBCASE("singular compliance is an error") {
    Mat6 S = Mat6::Zero();
    CHECK_THROWS_AS((void)compliance_to_stiffness(S), std::runtime_error);
  }
}

TEST_CASE("piezo_d_to_T") {
  Rank4 C = voigt_to_full(compliance_to_stiffness(pzt5h_compliance()));

  SUBCASE("zero d gives zero coupling") {
    Rank3 T = piezo_d_to_T(C, Mat36::Zero());
    CHECK(T.is_zero());
  }

  SUBCASE("identity Voigt stiffness re-indexes d") {
    Rank3 T = piezo_d_to_T(voigt_to_full(Mat6::Identity()), pzt5h_d());
    Mat36 d = pzt5h_d();
    for (int m = 0; m < 3; ++m)
      for (int I = 0; I < 6; ++I) {
        auto [i, j] = voigt_pairs[I];
        CHECK(T(m, i, j) == doctest::Approx(d(m, I)).epsilon(1e-12));
      }
  }

  SUBCASE("PZT-5H coupling against an index-by-index contraction oracle") {
    Mat36 d = pzt5h_d();
    Rank3 T = piezo_d_to_T(C, d);
    // independent expansion + contraction, written out directly
    double dt[3][3][3] = {};
    for (int m = 0; m < 3; ++m)
      for (int I = 0; I < 6; ++I) {
        auto [k, l] = voigt_pairs[I];
        double v = d(m, I) * (k == l ? 1.0 : 0.5);
        dt[m][k][l] = v;
        dt[m][l][k] = v;
      }
    for (int m = 0; m < 3; ++m)
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
          double s = 0.0;
          for (int k = 0; k < 3; ++k)
            for (int l = 0; l < 3; ++l) s += C(i, j, k, l) * dt[m][k][l];
          CHECK(T(m, i, j) == doctest::Approx(s).epsilon(1e-12));
        }
    // e33 = C13 d31 + C23 d31 + C33 d33 must be positive for PZT-5H
    CHECK(T(2, 2, 2) > 0.0);
  }
}

TEST_CASE("eval_linear") {
  LinearMaterial mat = pzt5h();

  SUBCASE("reference state returns exact zeros") {
    StateSample s = StateSample::reference(mat.T_ref);
    LinearResponse r = eval_linear(mat, s);
    CHECK(r.eta == 0.0);
    CHECK(r.N.norm() == 0.0);
    CHECK(r.P.norm() == 0.0);
    CHECK(r.M.norm() == 0.0);
  }

  SUBCASE("E3 = 1 V/m alone polarizes P3 = eps0 (eps33 - 1)") {
    StateSample s = StateSample::reference(mat.T_ref);
    s.E = Vec3(0, 0, 1);
    LinearResponse r = eval_linear(mat, s);
    CHECK(r.P[2] == doctest::Approx(eps0 * 3399.0 + mat.Ttilde(2, 2, 2) * 0.0).epsilon(1e-12));
    CHECK(r.P[0] == 0.0);
    // the piezoelectric back-coupling loads the stress
    CHECK(r.N(2, 2) == doctest::Approx(-mat.Ttilde(2, 2, 2)).epsilon(1e-12));
  }

  SUBCASE("isotropic thermal stress is hydrostatic -C:alpha dT") {
    LinearMaterial epoxy;
    double lambda, mu;
    lame_from_youngs(30e9, 0.4, lambda, mu);
    epoxy.rho0 = 2500.0;
    epoxy.C = voigt_to_full(isotropic_stiffness(lambda, mu));
    epoxy.alpha = 15e-6 * Mat3::Identity();
    StateSample s = StateSample::reference(epoxy.T_ref);
    s.T = epoxy.T_ref + 1.0;
    LinearResponse r = eval_linear(epoxy, s);
    double expect = -(3.0 * lambda + 2.0 * mu) * 15e-6;  // contraction oracle
    for (int i = 0; i < 3; ++i) CHECK(r.N(i, i) == doctest::Approx(expect).epsilon(1e-12));
    CHECK(std::abs(r.N(0, 1)) < 1e-12 * std::abs(expect));
    // entropy rises with temperature through c ln(T/Tref) plus the coupling term
    double eta_expect = epoxy.c_heat * std::log(s.T / epoxy.T_ref);
    CHECK(r.eta == doctest::Approx(eta_expect).epsilon(1e-12));
  }

  SUBCASE("rejects non-positive temperature and Jdet") {
    StateSample s = StateSample::reference(mat.T_ref);
    s.T = -1.0;
    CHECK_THROWS_AS((void)eval_linear(mat, s), std::runtime_error);
    s.T = 300.0;
    s.Jdet = -0.5;
    CHECK_THROWS_AS((void)eval_linear(mat, s), std::runtime_error);
  }
}

TEST_CASE("eval_magnetohyperelastic") {
  MagnetoHyperelasticMaterial mat;

  SUBCASE("stress-free reference") {
    auto r = eval_magnetohyperelastic(mat, Mat3::Identity(), Vec3::Zero());
    CHECK(r.psi == doctest::Approx(0.0));
    CHECK(r.N.norm() < 1e-12 * mat.mu_shear);
    CHECK(r.M.norm() == 0.0);
  }

  SUBCASE("F=I with axial B gives psi = (q+r) b^2") {
    double b = 0.37;
    auto r = eval_magnetohyperelastic(mat, Mat3::Identity(), Vec3(0, 0, b));
    CHECK(r.psi == doctest::Approx((mat.q_coef + mat.r_coef) * b * b).epsilon(1e-13));
    CHECK(r.M[2] == doctest::Approx(-2.0 * (mat.q_coef + mat.r_coef) * b).epsilon(1e-13));
  }

  SUBCASE("N and M match central finite differences of the energy") {
    for (int trial = 0; trial < 20; ++trial) {
      Mat3 F = Mat3::Identity() + 0.3 * random_mat(1.0);
      if (F.determinant() < 0.4) continue;
      Vec3 B(test::uniform(-1, 1), test::uniform(-1, 1), test::uniform(-1, 1));
      auto r = eval_magnetohyperelastic(mat, F, B);
      double scaleN = std::max(r.N.cwiseAbs().maxCoeff(), 1e-6 * mat.mu_shear);
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
          double h = 1e-6 * (1.0 + std::abs(F(i, j)));
          Mat3 Fp = F, Fm = F;
          Fp(i, j) += h;
          Fm(i, j) -= h;
          double fd = (mhe_energy(mat, Fp, B) - mhe_energy(mat, Fm, B)) / (2.0 * h);
          CHECK(r.N(j, i) == doctest::Approx(fd).epsilon(2e-6).scale(scaleN));
        }
      double J = F.determinant();
      double scaleM = std::max(r.M.norm(), 1e-9);
      for (int k = 0; k < 3; ++k) {
        double h = 1e-6 * (1.0 + std::abs(B[k]));
        Vec3 Bp = B, Bm = B;
        Bp[k] += h;
        Bm[k] -= h;
        double fd = (mhe_energy(mat, F, Bp) - mhe_energy(mat, F, Bm)) / (2.0 * h);
        CHECK(r.M[k] == doctest::Approx(-fd / J).epsilon(2e-6).scale(scaleM));
      }
    }
  }

  SUBCASE("non-positive det F is an error") {
    Mat3 F = Mat3::Identity();
    F(0, 0) = -1.0;
    CHECK_THROWS_AS((void)eval_magnetohyperelastic(mat, F, Vec3::Zero()), std::runtime_error);
  }
}

TEST_CASE("eval_fluxes") {
  LinearMaterial mat;
  mat.kappa = 1.3;  // epoxy

  SUBCASE("no forces, no fluxes") {
    Fluxes f = eval_fluxes(mat, Vec3::Zero(), Vec3::Zero(), 1.0, 300.0);
    CHECK(f.Q.norm() == 0.0);
    CHECK(f.Jfr.norm() == 0.0);
  }

  SUBCASE("Fourier limit") {
    Fluxes f = eval_fluxes(mat, Vec3(1, 0, 0), Vec3::Zero(), 1.0, 300.0);
    CHECK(f.Q[0] == doctest::Approx(-1.3));
    CHECK(f.Jfr.norm() == 0.0);
  }

  SUBCASE("entropy production is non-negative with active Peltier coupling") {
    for (int trial = 0; trial < 200; ++trial) {
      LinearMaterial m;
      m.kappa = test::uniform(0, 5);
      m.sigma_el = test::uniform(0, 5);
      m.peltier = test::uniform(-2, 2);
      double T = test::uniform(10, 600);
      double J = test::uniform(0.5, 2.0);
      Vec3 gT(test::uniform(-10, 10), test::uniform(-10, 10), test::uniform(-10, 10));
      Vec3 Es(test::uniform(-10, 10), test::uniform(-10, 10), test::uniform(-10, 10));
      Fluxes f = eval_fluxes(m, gT, Es, J, T);
      double production = -f.Q.dot(gT) / (T * T) + (J / T) * Es.dot(f.Jfr);
      CHECK(production >= -1e-15);
    }
  }
}

TEST_CASE("cauchy_stress") {
  SUBCASE("reduces to N at identity with no polarization") {
    Mat3 N = random_mat(2.0);
    Mat3 s = cauchy_stress(N, Mat3::Identity(), 1.0, Vec3::Zero(), Vec3::Zero(), Vec3::Zero(),
                           Vec3::Zero());
    CHECK((s - N).norm() < 1e-15);
  }

  SUBCASE("single polarization term") {
    Mat3 s = cauchy_stress(Mat3::Zero(), Mat3::Identity(), 1.0, Vec3(2, 0, 0), Vec3(3, 0, 0),
                           Vec3::Zero(), Vec3::Zero());
    CHECK(s(0, 0) == doctest::Approx(6.0));
    CHECK(std::abs(s(1, 1)) + std::abs(s(0, 1)) == 0.0);
  }

  SUBCASE("random inputs against the componentwise oracle") {
    for (int trial = 0; trial < 20; ++trial) {
      Mat3 N = random_mat(1.0);
      Mat3 F = Mat3::Identity() + 0.2 * random_mat(1.0);
      double J = F.determinant();
      if (J <= 0.1) continue;
      Vec3 P = 0.5 * Vec3::Random(), E = 2.0 * Vec3::Random(), M = Vec3::Random(),
           B = Vec3::Random();
      Mat3 s = cauchy_stress(N, F, J, P, E, M, B);
      for (int j = 0; j < 3; ++j)
        for (int i = 0; i < 3; ++i) {
          double expect = 0.0;
          for (int k = 0; k < 3; ++k) expect += F(j, k) * N(k, i) / J;
          expect += P[j] * E[i] - M[i] * B[j];
          CHECK(s(j, i) == doctest::Approx(expect).epsilon(1e-12));
        }
    }
  }
}
