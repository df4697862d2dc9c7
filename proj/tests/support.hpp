#pragma once

#include <Eigen/Dense>

#include <complex>
#include <cstdint>
#include <random>
#include <vector>

#include "ptdvp/tensor.hpp"

namespace ptdvp::test {

inline Eigen::MatrixXcd random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Eigen::MatrixXcd m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = cplx(g(rng), g(rng));
  return m;
}

inline Eigen::VectorXcd random_vector(Eigen::Index n, std::mt19937_64& rng) { return random_matrix(n, 1, rng); }

inline Eigen::MatrixXcd random_hermitian(Eigen::Index n, std::mt19937_64& rng) {
  const Eigen::MatrixXcd a = random_matrix(n, n, rng);
  return 0.5 * (a + a.adjoint());
}

inline Tensor random_tensor(Dims dims, std::mt19937_64& rng) {
  Tensor t(std::move(dims));
  std::normal_distribution<double> g;
  for (auto& x : t.data()) x = cplx(g(rng), g(rng));
  return t;
}

/// Operator `op` acting on site `site` of an n-site chain of d-level systems,
/// site 0 most significant.
inline Eigen::MatrixXcd embed(const Eigen::MatrixXcd& op, std::size_t site, std::size_t n) {
  Eigen::MatrixXcd out = Eigen::MatrixXcd::Identity(1, 1);
  const auto d = op.rows();
  for (std::size_t j = 0; j < n; ++j) {
    const Eigen::MatrixXcd f = j == site ? op : Eigen::MatrixXcd::Identity(d, d);
    Eigen::MatrixXcd next(out.rows() * d, out.cols() * d);
    for (Eigen::Index a = 0; a < out.rows(); ++a)
      for (Eigen::Index b = 0; b < out.cols(); ++b) next.block(a * d, b * d, d, d) = out(a, b) * f;
    out = next;
  }
  return out;
}

inline Eigen::VectorXcd kron(const Eigen::VectorXcd& a, const Eigen::VectorXcd& b) {
  Eigen::VectorXcd out(a.size() * b.size());
  for (Eigen::Index i = 0; i < a.size(); ++i) out.segment(i * b.size(), b.size()) = a[i] * b;
  return out;
}

/// 1 - |<a|b>| / (|a| |b|) for dense vectors.
inline double dense_infidelity(const Eigen::VectorXcd& a, const Eigen::VectorXcd& b) {
  return 1.0 - std::abs(a.dot(b)) / (a.norm() * b.norm());
}

/// 1 - |<a|b>| for normalized a, b, evaluated as d^2/2 with d the distance
/// after aligning the global phase; accurate well below 1e-16.
inline double aligned_infidelity(const Eigen::VectorXcd& a, const Eigen::VectorXcd& b) {
  const Eigen::VectorXcd x = a / a.norm();
  const Eigen::VectorXcd y = b / b.norm();
  const cplx ov = x.dot(y);
  const cplx phase = std::abs(ov) > 0.0 ? ov / std::abs(ov) : cplx(1.0);
  const double d = (x - y * std::conj(phase)).norm();
  return 0.5 * d * d;
}

}  // namespace ptdvp::test
