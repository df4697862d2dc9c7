#pragma once

// Spin-1/2 operators. Basis convention used project-wide: index 0 is |0> with
// sigma^z = -1, index 1 is |1> with sigma^z = +1.

#include <Eigen/Dense>

#include <cmath>
#include <complex>

#include "ptdvp/tensor.hpp"

namespace ptdvp::spin {

inline Eigen::Matrix2cd identity() { return Eigen::Matrix2cd::Identity(); }

inline Eigen::Matrix2cd sigma_x() {
  Eigen::Matrix2cd m;
  m << 0.0, 1.0, 1.0, 0.0;
  return m;
}

inline Eigen::Matrix2cd sigma_y() {
  const cplx i(0.0, 1.0);
  Eigen::Matrix2cd m;
  m << 0.0, i, -i, 0.0;
  return m;
}

inline Eigen::Matrix2cd sigma_z() {
  Eigen::Matrix2cd m;
  m << -1.0, 0.0, 0.0, 1.0;
  return m;
}

/// |1>, the sigma^z = +1 eigenstate.
inline Eigen::VectorXcd up() { return Eigen::Vector2cd(0.0, 1.0); }
/// |0>, the sigma^z = -1 eigenstate.
inline Eigen::VectorXcd down() { return Eigen::Vector2cd(1.0, 0.0); }

/// exp(i * angle * sigma^y) = cos(angle) 1 + i sin(angle) sigma^y.
inline Eigen::Matrix2cd rotation_y(double angle) {
  return std::cos(angle) * identity() + cplx(0.0, std::sin(angle)) * sigma_y();
}

}  // namespace ptdvp::spin
