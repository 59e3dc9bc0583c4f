#pragma once

// Voigt conventions shared by every module.
//
// Order: 11, 22, 33, 12, 13, 23. Strain vectors carry engineering shear
// (gamma_ij = 2 eps_ij), stress vectors carry plain tensor components, so the
// work conjugate product is an ordinary dot product.

#include <cmath>

#include <Eigen/Core>

namespace pcrnn {

using Vec3 = Eigen::Vector3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat3 = Eigen::Matrix3d;
using Mat6 = Eigen::Matrix<double, 6, 6>;

namespace voigt {

inline double trace(const Vec6& v) { return v(0) + v(1) + v(2); }

inline Vec6 deviator(const Vec6& stress) {
  Vec6 s = stress;
  const double p = trace(stress) / 3.0;
  s(0) -= p;
  s(1) -= p;
  s(2) -= p;
  return s;
}

/// s:s for a stress-like Voigt vector (shear terms counted twice).
inline double stress_norm_sq(const Vec6& s) {
  return s(0) * s(0) + s(1) * s(1) + s(2) * s(2) + 2.0 * (s(3) * s(3) + s(4) * s(4) + s(5) * s(5));
}

inline double von_mises(const Vec6& stress) {
  return std::sqrt(1.5 * stress_norm_sq(deviator(stress)));
}

/// Symmetric strain tensor from an engineering-shear strain vector.
inline Mat3 strain_tensor(const Vec6& e) {
  Mat3 t;
  t << e(0), 0.5 * e(3), 0.5 * e(4),
       0.5 * e(3), e(1), 0.5 * e(5),
       0.5 * e(4), 0.5 * e(5), e(2);
  return t;
}

inline Vec6 strain_vector(const Mat3& t) {
  Vec6 e;
  e << t(0, 0), t(1, 1), t(2, 2), t(0, 1) + t(1, 0), t(0, 2) + t(2, 0), t(1, 2) + t(2, 1);
  return e;
}

/// Work conjugate product S:E for a stress vector and an engineering-shear strain vector.
inline double work(const Vec6& stress, const Vec6& strain) { return stress.dot(strain); }

}  // namespace voigt
}  // namespace pcrnn
