#pragma once

// Dense kernels shared by every engine: truncated SVD with discarded-weight
// accounting, Lanczos exponentiation and a restarted Lanczos ground-state solver.

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <vector>

#include "ptdvp/error.hpp"
#include "ptdvp/tensor.hpp"

namespace ptdvp {

/// Singular values below this fraction of the largest one are always dropped,
/// so that their reciprocals stay finite.
inline constexpr double kSvdZeroFloor = 1e-14;

struct TruncationPolicy {
  std::size_t chi_max = 64;
  double w_max = 0.0;     // maximum discarded weight per SVD
  double epsilon = 1e-12; // relative singular-value cutoff

  void validate() const {
    detail::require(chi_max >= 1, "chi_max must be >= 1");
    detail::require(w_max >= 0.0, "w_max must be >= 0");
    detail::require(epsilon >= 0.0 && epsilon < 1.0, "epsilon must lie in [0, 1)");
  }
};

struct SvdResult {
  Eigen::MatrixXcd left_isometry;   // rows x kept, orthonormal columns
  Eigen::VectorXd weights;          // kept singular values, descending
  Eigen::MatrixXcd right_isometry;  // kept x cols, orthonormal rows
  double discarded_weight = 0.0;
  std::size_t kept_rank = 0;
};

/// Number of singular values kept under `policy`, given them in descending
/// order. Writes the discarded weight (sum of squared dropped values).
inline std::size_t truncation_rank(const Eigen::VectorXd& s, const TruncationPolicy& policy,
                                   double& discarded) {
  const auto n = static_cast<std::size_t>(s.size());
  const double cutoff = std::max(policy.epsilon, kSvdZeroFloor) * s[0];
  std::size_t above = 0;
  while (above < n && s[static_cast<Eigen::Index>(above)] >= cutoff) ++above;
  above = std::max<std::size_t>(above, 1);

  // tail[r] = sum_{i >= r} s_i^2, accumulated from the small end
  std::vector<double> tail(n + 1, 0.0);
  for (std::size_t i = n; i-- > 0;) {
    const double v = s[static_cast<Eigen::Index>(i)];
    tail[i] = tail[i + 1] + v * v;
  }
  std::size_t chi_w = above;
  for (std::size_t r = 1; r < above; ++r) {
    if (tail[r] <= policy.w_max) {
      chi_w = r;
      break;
    }
  }
  const std::size_t kept = std::min(chi_w, policy.chi_max);
  discarded = tail[kept];
  return kept;
}

inline SvdResult truncated_svd(const Eigen::MatrixXcd& m, const TruncationPolicy& policy) {
  policy.validate();
  if (m.size() == 0) throw ConfigError("truncated_svd: empty matrix");
  if (!m.allFinite()) throw NumericalError("truncated_svd: non-finite entries");

  Eigen::BDCSVD<Eigen::MatrixXcd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& s = svd.singularValues();
  if (!(s[0] > 0.0)) throw NumericalError("truncated_svd: zero matrix");

  SvdResult out;
  const std::size_t kept = truncation_rank(s, policy, out.discarded_weight);
  const auto k = static_cast<Eigen::Index>(kept);
  out.kept_rank = kept;
  out.weights = s.head(k);
  out.left_isometry = svd.matrixU().leftCols(k);
  out.right_isometry = svd.matrixV().leftCols(k).adjoint();
  return out;
}

// ---------------------------------------------------------------------------
// Krylov methods

struct KrylovConfig {
  int max_basis_vectors = 8;
  double tolerance = 1e-6;

  void validate() const {
    detail::require(max_basis_vectors >= 2, "Krylov basis needs at least 2 vectors");
    detail::require(tolerance > 0.0, "Krylov tolerance must be positive");
  }
};

struct KrylovResult {
  Eigen::VectorXcd vector;
  bool converged = false;
  int basis_size = 0;
  double error_estimate = 0.0;
};

namespace detail {

/// Orthogonalizes w against the columns [0, k) of q twice (classical Gram-Schmidt).
inline void reorthogonalize(Eigen::VectorXcd& w, const Eigen::MatrixXcd& q, Eigen::Index k) {
  for (int pass = 0; pass < 2; ++pass) {
    const Eigen::VectorXcd coeff = q.leftCols(k).adjoint() * w;
    w.noalias() -= q.leftCols(k) * coeff;
  }
}

/// Symmetric tridiagonal eigendecomposition of the Lanczos matrix T_k.
inline Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> tridiagonal_eigen(const std::vector<double>& alpha,
                                                                        const std::vector<double>& beta,
                                                                        Eigen::Index k) {
  Eigen::VectorXd diag(k), sub(std::max<Eigen::Index>(k - 1, 0));
  for (Eigen::Index i = 0; i < k; ++i) diag[i] = alpha[static_cast<std::size_t>(i)];
  for (Eigen::Index i = 0; i + 1 < k; ++i) sub[i] = beta[static_cast<std::size_t>(i)];
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
  es.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
  return es;
}

}  // namespace detail

/// Approximates exp(tau * H) v in a Lanczos basis of at most
/// cfg.max_basis_vectors vectors. `apply` must be Hermitian.
template <typename ApplyOp>
KrylovResult krylov_expm_apply(ApplyOp&& apply, const Eigen::VectorXcd& v, cplx tau, const KrylovConfig& cfg) {
  cfg.validate();
  const double beta0 = v.norm();
  if (!(beta0 > 0.0)) throw ConfigError("krylov_expm_apply: zero start vector");
  KrylovResult out;
  if (tau == cplx(0.0)) {
    out.vector = v;
    out.converged = true;
    return out;
  }

  const Eigen::Index n = v.size();
  const Eigen::Index m = std::min<Eigen::Index>(cfg.max_basis_vectors, n);
  Eigen::MatrixXcd q(n, m);
  q.col(0) = v / beta0;
  std::vector<double> alpha, beta;
  alpha.reserve(static_cast<std::size_t>(m));
  beta.reserve(static_cast<std::size_t>(m));

  Eigen::VectorXcd coeffs;
  double scale = 0.0;
  for (Eigen::Index k = 0; k < m; ++k) {
    Eigen::VectorXcd w = apply(q.col(k));
    const double a = q.col(k).dot(w).real();
    alpha.push_back(a);
    scale = std::max(scale, std::abs(a));
    w -= a * q.col(k);
    if (k > 0) w -= beta.back() * q.col(k - 1);
    detail::reorthogonalize(w, q, k + 1);
    const double b = w.norm();
    scale = std::max(scale, b);

    const Eigen::Index dim = k + 1;
    const auto es = detail::tridiagonal_eigen(alpha, beta, dim);
    const Eigen::VectorXcd phase =
        (tau * es.eigenvalues().cast<cplx>()).array().exp().matrix();
    const Eigen::VectorXcd first_row = es.eigenvectors().row(0).transpose().cast<cplx>();
    coeffs = es.eigenvectors().cast<cplx>() * phase.cwiseProduct(first_row);
    out.basis_size = static_cast<int>(dim);

    const bool breakdown = b < 1e-14 * std::max(1.0, scale);
    const bool exhausted = dim == n;
    out.error_estimate = breakdown || exhausted ? 0.0 : b * std::abs(coeffs[dim - 1]);
    if (breakdown || exhausted || out.error_estimate <= cfg.tolerance) {
      out.converged = true;
      break;
    }
    if (k + 1 < m) {
      beta.push_back(b);
      q.col(k + 1) = w / b;
    }
  }
  out.vector = beta0 * (q.leftCols(coeffs.size()) * coeffs);
  return out;
}

struct EigenpairResult {
  double value = 0.0;
  Eigen::VectorXcd vector;
  bool converged = false;
  int restarts = 0;
  double residual = 0.0;
};

/// Lowest eigenpair of a Hermitian operator by Lanczos, restarted from the
/// current Ritz vector. Full reorthogonalization inside each cycle.
template <typename ApplyOp>
EigenpairResult lanczos_ground_state(ApplyOp&& apply, const Eigen::VectorXcd& v0, const KrylovConfig& cfg,
                                     int max_restarts, double residual_tol = 1e-8) {
  cfg.validate();
  detail::require(max_restarts >= 1, "max_restarts must be >= 1");
  const double nrm = v0.norm();
  if (!(nrm > 0.0)) throw ConfigError("lanczos_ground_state: zero start vector");

  const Eigen::Index n = v0.size();
  const Eigen::Index m = std::min<Eigen::Index>(cfg.max_basis_vectors, n);
  EigenpairResult out;
  out.vector = v0 / nrm;

  for (int cycle = 0; cycle < max_restarts; ++cycle) {
    out.restarts = cycle;
    Eigen::MatrixXcd q(n, m);
    q.col(0) = out.vector;
    std::vector<double> alpha, beta;
    Eigen::Index dim = 0;
    double scale = 0.0;
    for (Eigen::Index k = 0; k < m; ++k) {
      Eigen::VectorXcd w = apply(q.col(k));
      const double a = q.col(k).dot(w).real();
      alpha.push_back(a);
      scale = std::max(scale, std::abs(a));
      w -= a * q.col(k);
      if (k > 0) w -= beta.back() * q.col(k - 1);
      detail::reorthogonalize(w, q, k + 1);
      const double b = w.norm();
      scale = std::max(scale, b);
      dim = k + 1;
      if (b < 1e-14 * std::max(1.0, scale) || k + 1 == m) break;
      beta.push_back(b);
      q.col(k + 1) = w / b;
    }
    const auto es = detail::tridiagonal_eigen(alpha, beta, dim);
    out.value = es.eigenvalues()[0];
    Eigen::VectorXcd x = q.leftCols(dim) * es.eigenvectors().col(0).cast<cplx>();
    x.normalize();
    out.vector = x;
    const Eigen::VectorXcd r = apply(x) - out.value * x;
    out.residual = r.norm();
    if (out.residual <= residual_tol) {
      out.converged = true;
      return out;
    }
  }
  return out;
}

}  // namespace ptdvp
