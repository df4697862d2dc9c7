#pragma once

// Local effective-Hamiltonian actions and the one- and two-site Krylov
// updates shared by the serial, parallel and DMRG sweeps.

#include <algorithm>

#include "ptdvp/environment.hpp"
#include "ptdvp/linalg.hpp"
#include "ptdvp/mpo.hpp"
#include "ptdvp/mps.hpp"

namespace ptdvp {

/// H_eff^(2) theta for theta with axes (chi_L, d, d, chi_R). The contraction
/// order keeps the cost at O(chi^3 m d^2 + chi^2 m^2 d^3).
inline Tensor apply_h2(const Environment& beta, const MpoTensor& wl, const MpoTensor& wr, const Environment& gamma,
                       const Tensor& theta) {
  detail::require_shape(theta.rank() == 4 && beta.chi() == theta.dim(0) && gamma.chi() == theta.dim(3) &&
                            beta.m() == wl.m_left() && wl.m_right() == wr.m_left() && wr.m_right() == gamma.m() &&
                            wl.phys() == theta.dim(1) && wr.phys() == theta.dim(2),
                        "apply_h2: shape mismatch");
  const Tensor t1 = contract(beta.data, {2}, theta, {0});        // (a', w, s1, s2, b)
  const Tensor t2 = contract(t1, {1, 2}, wl.tensor(), {0, 2});    // (a', s2, b, s1', w1)
  const Tensor t3 = contract(t2, {4, 1}, wr.tensor(), {0, 2});    // (a', b, s1', s2', w2)
  return contract(t3, {1, 4}, gamma.data, {2, 1});                // (a', s1', s2', b')
}

/// H_eff^(1) theta for theta with axes (chi_L, d, chi_R).
inline Tensor apply_h1(const Environment& beta, const MpoTensor& w, const Environment& gamma, const Tensor& theta) {
  detail::require_shape(theta.rank() == 3 && beta.chi() == theta.dim(0) && gamma.chi() == theta.dim(2) &&
                            beta.m() == w.m_left() && w.m_right() == gamma.m() && w.phys() == theta.dim(1),
                        "apply_h1: shape mismatch");
  const Tensor t1 = contract(beta.data, {2}, theta, {0});      // (a', w, s, b)
  const Tensor t2 = contract(t1, {1, 2}, w.tensor(), {0, 2});   // (a', b, s', w')
  return contract(t2, {1, 3}, gamma.data, {2, 1});              // (a', s', b')
}

/// Theta = Psi_L V Psi_R with axes (chi_L, d_L, d_R, chi_R).
inline Tensor form_theta(const SiteTensor& left, const BondWeights& v, const SiteTensor& right) {
  detail::require_shape(left.chi_right() == v.size() && v.size() == right.chi_left(), "form_theta: bond mismatch");
  return contract(scale_axis(left.tensor(), 2, v.inv), {2}, right.tensor(), {0});
}

struct SplitResult {
  SiteTensor left;   // A' Lambda'
  BondWeights bond;  // Lambda' and V' = Lambda'^-1
  SiteTensor right;  // Lambda' B'
  double discarded_weight = 0.0;
};

/// Truncated SVD of theta (chi_L d x d chi_R) into Psi_L' V' Psi_R'.
inline SplitResult split_theta(const Tensor& theta, const TruncationPolicy& policy) {
  detail::require_shape(theta.rank() == 4, "split_theta: theta must have rank 4");
  if (!theta.all_finite()) throw NumericalError("split_theta: non-finite theta");
  const std::size_t cl = theta.dim(0), dl = theta.dim(1), dr = theta.dim(2), cr = theta.dim(3);
  const SvdResult svd = truncated_svd(theta.matrix(2), policy);
  const std::size_t k = svd.kept_rank;
  const Eigen::VectorXcd lam = svd.weights.cast<cplx>();

  RowMatrix l = svd.left_isometry * lam.asDiagonal();
  RowMatrix r = lam.asDiagonal() * svd.right_isometry;
  SplitResult out{SiteTensor(Tensor(Dims{cl, dl, k}, Eigen::Map<Eigen::VectorXcd>(l.data(), l.size()))),
                  BondWeights::from_lambda(std::vector<double>(svd.weights.data(), svd.weights.data() + k)),
                  SiteTensor(Tensor(Dims{k, dr, cr}, Eigen::Map<Eigen::VectorXcd>(r.data(), r.size()))),
                  svd.discarded_weight};
  return out;
}

/// Counters accumulated over local updates.
struct UpdateStats {
  double discarded_weight = 0.0;
  std::size_t svd_count = 0;
  std::size_t krylov_calls = 0;
  std::size_t krylov_unconverged = 0;
  double max_krylov_error = 0.0;

  void add(const UpdateStats& o) {
    discarded_weight += o.discarded_weight;
    svd_count += o.svd_count;
    krylov_calls += o.krylov_calls;
    krylov_unconverged += o.krylov_unconverged;
    max_krylov_error = std::max(max_krylov_error, o.max_krylov_error);
  }
};

namespace detail {

inline void record(UpdateStats& stats, const KrylovResult& r) {
  ++stats.krylov_calls;
  if (!r.converged) ++stats.krylov_unconverged;
  stats.max_krylov_error = std::max(stats.max_krylov_error, r.error_estimate);
}

}  // namespace detail

/// exp(tau H_eff^(2)) theta.
inline Tensor evolve_two_site(const Environment& beta, const MpoTensor& wl, const MpoTensor& wr,
                              const Environment& gamma, const Tensor& theta, cplx tau, const KrylovConfig& cfg,
                              UpdateStats& stats) {
  const Dims dims = theta.dims();
  auto apply = [&](const Eigen::VectorXcd& x) -> Eigen::VectorXcd {
    return apply_h2(beta, wl, wr, gamma, Tensor(dims, x)).data();
  };
  KrylovResult r = krylov_expm_apply(apply, theta.data(), tau, cfg);
  detail::record(stats, r);
  return Tensor(dims, std::move(r.vector));
}

/// exp(tau H_eff^(1)) psi.
inline SiteTensor evolve_one_site(const Environment& beta, const MpoTensor& w, const Environment& gamma,
                                  const SiteTensor& psi, cplx tau, const KrylovConfig& cfg, UpdateStats& stats) {
  const Dims dims = psi.tensor().dims();
  auto apply = [&](const Eigen::VectorXcd& x) -> Eigen::VectorXcd {
    return apply_h1(beta, w, gamma, Tensor(dims, x)).data();
  };
  KrylovResult r = krylov_expm_apply(apply, psi.tensor().data(), tau, cfg);
  detail::record(stats, r);
  return SiteTensor(Tensor(dims, std::move(r.vector)));
}

}  // namespace ptdvp
