#pragma once

// Dense references for small chains: Hamiltonian matrices built directly in
// the computational basis (independently of the MPO automaton), exact time
// evolution by eigendecomposition, and the relative-difference metrics.

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <optional>
#include <vector>

#include "ptdvp/error.hpp"
#include "ptdvp/expfit.hpp"
#include "ptdvp/mpo.hpp"

namespace ptdvp {

/// Coupling J(r) of the model at distance r >= 1: the fitted exponential sum
/// when `fit` is given, the exact power law otherwise.
inline double model_coupling(const ModelSpec& spec, const ExpSumFit* fit, std::size_t r) {
  if (spec.model == Model::IsingNN) return r == 1 ? 1.0 : 0.0;
  if (fit) return (*fit)(static_cast<double>(r));
  return std::pow(static_cast<double>(r), -spec.alpha);
}

/// Dense H for `spec` (qubits, site 0 most significant).
inline Eigen::MatrixXcd dense_hamiltonian(const ModelSpec& spec, const ExpSumFit* fit,
                                          std::size_t cap = std::size_t{1} << 14) {
  spec.validate();
  const std::size_t n = spec.n_sites;
  if (n >= 63 || (std::size_t{1} << n) > cap) throw ConfigError("dense_hamiltonian: dimension exceeds cap");
  const auto dim = static_cast<Eigen::Index>(std::size_t{1} << n);
  Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(dim, dim);
  auto bit = [n](std::size_t site) { return std::size_t{1} << (n - 1 - site); };

  const auto terms = pair_terms(spec);
  const Eigen::MatrixXcd onsite = onsite_term(spec);
  for (Eigen::Index col = 0; col < dim; ++col) {
    const auto s = static_cast<std::size_t>(col);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t si = (s & bit(i)) ? 1 : 0;
      for (std::size_t oi = 0; oi < 2; ++oi) {
        const cplx v = onsite(static_cast<Eigen::Index>(oi), static_cast<Eigen::Index>(si));
        if (v == cplx(0.0)) continue;
        const std::size_t row = oi ? (s | bit(i)) : (s & ~bit(i));
        h(static_cast<Eigen::Index>(row), col) += v;
      }
      for (std::size_t j = i + 1; j < n; ++j) {
        const double jr = model_coupling(spec, fit, j - i);
        if (jr == 0.0) continue;
        const std::size_t sj = (s & bit(j)) ? 1 : 0;
        for (const auto& term : terms) {
          for (std::size_t oi = 0; oi < 2; ++oi)
            for (std::size_t oj = 0; oj < 2; ++oj) {
              const cplx v = term.prefactor * jr * term.a(static_cast<Eigen::Index>(oi), static_cast<Eigen::Index>(si)) *
                             term.b(static_cast<Eigen::Index>(oj), static_cast<Eigen::Index>(sj));
              if (v == cplx(0.0)) continue;
              std::size_t row = oi ? (s | bit(i)) : (s & ~bit(i));
              row = oj ? (row | bit(j)) : (row & ~bit(j));
              h(static_cast<Eigen::Index>(row), col) += v;
            }
        }
      }
    }
  }
  return h;
}

/// Exact propagator e^{-iHt} through a cached eigendecomposition of H.
class DenseEvolver {
 public:
  explicit DenseEvolver(const Eigen::MatrixXcd& h) {
    detail::require(h.rows() == h.cols(), "DenseEvolver: H must be square");
    es_.compute(h);
    if (es_.info() != Eigen::Success) throw NumericalError("DenseEvolver: eigendecomposition failed");
  }

  Eigen::VectorXcd evolve(const Eigen::VectorXcd& psi0, double t) const {
    detail::require_shape(psi0.size() == es_.eigenvectors().rows(), "DenseEvolver: state dimension mismatch");
    const Eigen::VectorXcd c = es_.eigenvectors().adjoint() * psi0;
    const Eigen::VectorXcd ph = (cplx(0.0, -t) * es_.eigenvalues().cast<cplx>()).array().exp().matrix();
    return es_.eigenvectors() * ph.cwiseProduct(c);
  }

  const Eigen::VectorXd& energies() const { return es_.eigenvalues(); }
  Eigen::VectorXcd ground_state() const { return es_.eigenvectors().col(0); }

 private:
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es_;
};

inline Eigen::VectorXcd exact_evolve(const Eigen::VectorXcd& psi0, const Eigen::MatrixXcd& h, double t) {
  return DenseEvolver(h).evolve(psi0, t);
}

/// |C - C_ref| / |C_ref|; nothing when the reference vanishes.
inline std::optional<double> relative_difference(cplx c, cplx c_ref) {
  if (std::abs(c_ref) == 0.0) return std::nullopt;
  return std::abs(c - c_ref) / std::abs(c_ref);
}

/// Deviation from the thermodynamic-limit reference.
inline std::optional<double> eta_infinity(cplx c, cplx c_inf) { return relative_difference(c, c_inf); }

/// Deviation of a parallel result from the serial one.
inline std::optional<double> eta_p(cplx c_par, cplx c_ser) { return relative_difference(c_par, c_ser); }

}  // namespace ptdvp
