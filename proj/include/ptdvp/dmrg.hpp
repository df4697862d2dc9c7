#pragma once

// Two-site DMRG on the same environment and splitting machinery as TDVP: the
// local exponential is replaced by the lowest eigenvector of H_eff^(2).

#include <cmath>
#include <limits>
#include <vector>

#include "ptdvp/environment.hpp"
#include "ptdvp/local_update.hpp"

namespace ptdvp {

struct DmrgConfig {
  TruncationPolicy policy{};
  KrylovConfig krylov{.max_basis_vectors = 8, .tolerance = 1e-6};
  int max_restarts = 20;
  int max_sweeps = 20;
  double energy_tol = 1e-10;

  void validate() const {
    policy.validate();
    krylov.validate();
    detail::require(max_sweeps >= 1, "max_sweeps must be >= 1");
    detail::require(max_restarts >= 1, "max_restarts must be >= 1");
    detail::require(energy_tol >= 0.0, "energy_tol must be >= 0");
  }
};

struct DmrgResult {
  InvCanonicalMps state;
  double energy = 0.0;
  bool converged = false;
  std::vector<double> sweep_energies;
  double discarded_weight = 0.0;
  std::size_t unconverged_local_solves = 0;
};

/// A sweep is one left-to-right plus one right-to-left pass over all pairs.
inline DmrgResult dmrg_ground_state(const Mpo& h, InvCanonicalMps psi, const DmrgConfig& cfg) {
  cfg.validate();
  detail::check_shapes(psi, h);
  const std::size_t n = psi.size();
  detail::require(n >= 2, "dmrg_ground_state: need at least two sites");

  DmrgResult out;
  EnvCache cache = init_right_environments(psi, h);
  double energy = std::numeric_limits<double>::infinity();

  auto solve_pair = [&](std::size_t j) {
    const Tensor theta = form_theta(psi.site(j), psi.bond(j), psi.site(j + 1));
    const Dims dims = theta.dims();
    const Environment& beta = cache.beta(j);
    const Environment& gamma = cache.gamma(j + 1);
    auto apply = [&](const Eigen::VectorXcd& x) -> Eigen::VectorXcd {
      return apply_h2(beta, h[j], h[j + 1], gamma, Tensor(dims, x)).data();
    };
    EigenpairResult eig = lanczos_ground_state(apply, theta.data(), cfg.krylov, cfg.max_restarts);
    if (!eig.converged) ++out.unconverged_local_solves;
    energy = eig.value;
    SplitResult s = split_theta(Tensor(dims, std::move(eig.vector)), cfg.policy);
    out.discarded_weight += s.discarded_weight;
    psi.site(j) = std::move(s.left);
    psi.bond(j) = std::move(s.bond);
    psi.site(j + 1) = std::move(s.right);
  };

  double previous = std::numeric_limits<double>::infinity();
  for (int sweep = 0; sweep < cfg.max_sweeps; ++sweep) {
    for (std::size_t j = 0; j + 1 < n; ++j) {
      solve_pair(j);
      if (j + 2 < n) cache.left[j + 1] = update_left_environment(cache.beta(j), psi.site(j), psi.bond(j), h[j]);
    }
    for (std::size_t j = n - 1; j-- > 0;) {
      if (j + 2 < n) solve_pair(j);
      if (j > 0) {
        cache.right[j] = update_right_environment(cache.gamma(j + 1), psi.site(j + 1), psi.bond(j), h[j + 1]);
      }
    }
    out.sweep_energies.push_back(energy);
    if (std::abs(previous - energy) <= cfg.energy_tol) {
      out.converged = true;
      break;
    }
    previous = energy;
  }
  out.energy = energy;
  out.state = std::move(psi);
  return out;
}

}  // namespace ptdvp
