#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>

namespace emsi {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using Mat36 = Eigen::Matrix<double, 3, 6>;

// Universal constants (SI).
inline constexpr double eps0 = 8.8541878128e-12;    // A s / (V m)
inline constexpr double mu0 = 1.25663706212e-6;     // V s / (A m)
inline const double c_light = 1.0 / std::sqrt(mu0 * eps0);

constexpr double kronecker(int i, int j) { return i == j ? 1.0 : 0.0; }

constexpr double levi_civita(int i, int j, int k) {
  if (i == j || j == k || i == k) return 0.0;
  // even permutations of (0,1,2)
  if ((i == 0 && j == 1) || (i == 1 && j == 2) || (i == 2 && j == 0)) return 1.0;
  return -1.0;
}

inline Vec3 cross(const Vec3& a, const Vec3& b) { return a.cross(b); }

// Voigt pair table: I -> (i,j) with the usual ordering 11,22,33,23,13,12.
inline constexpr std::array<std::array<int, 2>, 6> voigt_pairs = {
    {{0, 0}, {1, 1}, {2, 2}, {1, 2}, {0, 2}, {0, 1}}};

inline int voigt_index(int i, int j) {
  if (i == j) return i;
  int s = i + j;       // 3 -> (1,2), 2 -> (0,2), 1 -> (0,1)
  return s == 3 ? 3 : (s == 2 ? 4 : 5);
}

// Rank-3 coupling tensor t(k,i,j), e.g. piezoelectric Ttilde_{kij}.
struct Rank3 {
  std::array<double, 27> a{};

  double& operator()(int k, int i, int j) { return a[9 * k + 3 * i + j]; }
  double operator()(int k, int i, int j) const { return a[9 * k + 3 * i + j]; }

  bool is_zero() const {
    for (double x : a)
      if (x != 0.0) return false;
    return true;
  }

  // contract over the last pair: out_k = t(k,i,j) G(i,j)
  Vec3 contract_right(const Mat3& G) const {
    Vec3 out = Vec3::Zero();
    for (int k = 0; k < 3; ++k)
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) out[k] += (*this)(k, i, j) * G(i, j);
    return out;
  }

  // contract over the first index: out(i,j) = t(k,i,j) v_k
  Mat3 contract_left(const Vec3& v) const {
    Mat3 out = Mat3::Zero();
    for (int k = 0; k < 3; ++k)
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) out(i, j) += (*this)(k, i, j) * v[k];
    return out;
  }
};

// Rank-4 stiffness acting on (unsymmetrized) displacement-gradient pairs:
// apply(G)(j,i) = C_{jikl} G_{kl}.  Stored as a 9x9 matrix with flat(a,b)=3a+b.
struct Rank4 {
  Eigen::Matrix<double, 9, 9> m = Eigen::Matrix<double, 9, 9>::Zero();
  bool voigt_symmetric = false;  // set when built from a symmetric Voigt matrix

  static int flat(int a, int b) { return 3 * a + b; }

  double& operator()(int j, int i, int k, int l) { return m(flat(j, i), flat(k, l)); }
  double operator()(int j, int i, int k, int l) const { return m(flat(j, i), flat(k, l)); }

  Mat3 apply(const Mat3& G) const {
    Eigen::Matrix<double, 9, 1> g;
    for (int k = 0; k < 3; ++k)
      for (int l = 0; l < 3; ++l) g[flat(k, l)] = G(k, l);
    Eigen::Matrix<double, 9, 1> n = m * g;
    Mat3 N;
    for (int j = 0; j < 3; ++j)
      for (int i = 0; i < 3; ++i) N(j, i) = n[flat(j, i)];
    return N;
  }
};

// Basis change x' = R x for material tensors given in a local material frame.
inline Mat3 rotate(const Mat3& A, const Mat3& R) { return R * A * R.transpose(); }

inline Rank3 rotate(const Rank3& t, const Mat3& R) {
  Rank3 out;
  for (int k = 0; k < 3; ++k)
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        double s = 0.0;
        for (int p = 0; p < 3; ++p)
          for (int q = 0; q < 3; ++q)
            for (int r = 0; r < 3; ++r) s += R(k, p) * R(i, q) * R(j, r) * t(p, q, r);
        out(k, i, j) = s;
      }
  return out;
}

inline Rank4 rotate(const Rank4& c, const Mat3& R) {
  Rank4 out;
  out.voigt_symmetric = c.voigt_symmetric;
  for (int j = 0; j < 3; ++j)
    for (int i = 0; i < 3; ++i)
      for (int k = 0; k < 3; ++k)
        for (int l = 0; l < 3; ++l) {
          double s = 0.0;
          for (int p = 0; p < 3; ++p)
            for (int q = 0; q < 3; ++q)
              for (int r = 0; r < 3; ++r)
                for (int w = 0; w < 3; ++w)
                  s += R(j, p) * R(i, q) * R(k, r) * R(l, w) * c(p, q, r, w);
          out(j, i, k, l) = s;
        }
  return out;
}

}  // namespace emsi
