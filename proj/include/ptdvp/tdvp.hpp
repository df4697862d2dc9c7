#pragma once

// Serial two-site TDVP in the inverse canonical gauge. One timestep is a
// left-to-right sweep with half steps, a full step on the rightmost pair, and
// the mirrored right-to-left sweep.

#include <complex>

#include "ptdvp/environment.hpp"
#include "ptdvp/local_update.hpp"

namespace ptdvp {

struct EvolutionConfig {
  double dt = 0.02;
  TruncationPolicy policy{};
  KrylovConfig krylov{};

  void validate() const {
    detail::require(dt > 0.0 && std::isfinite(dt), "dt must be positive");
    policy.validate();
    krylov.validate();
  }
};

/// Advances psi by dt in place. `cache` must hold beta_0 and gamma_0..gamma_{N-1}
/// for the current state (as left by init_right_environments or a previous
/// step); it is left in the same condition.
inline UpdateStats serial_timestep(InvCanonicalMps& psi, const Mpo& h, EnvCache& cache, const EvolutionConfig& cfg) {
  cfg.validate();
  detail::check_shapes(psi, h);
  const std::size_t n = psi.size();
  detail::require(n >= 2, "serial_timestep: need at least two sites");
  detail::require_shape(cache.size() == n, "serial_timestep: environment cache size mismatch");
  const cplx fwd_half(0.0, -0.5 * cfg.dt), bwd_half(0.0, 0.5 * cfg.dt), fwd_full(0.0, -cfg.dt);
  UpdateStats stats;

  auto pair_update = [&](std::size_t j, cplx tau) {
    const Tensor theta = form_theta(psi.site(j), psi.bond(j), psi.site(j + 1));
    const Tensor evolved = evolve_two_site(cache.beta(j), h[j], h[j + 1], cache.gamma(j + 1), theta, tau, cfg.krylov, stats);
    SplitResult s = split_theta(evolved, cfg.policy);
    stats.discarded_weight += s.discarded_weight;
    ++stats.svd_count;
    psi.site(j) = std::move(s.left);
    psi.bond(j) = std::move(s.bond);
    psi.site(j + 1) = std::move(s.right);
  };
  auto site_update = [&](std::size_t j) {
    psi.site(j) = evolve_one_site(cache.beta(j), h[j], cache.gamma(j), psi.site(j), bwd_half, cfg.krylov, stats);
  };

  // left to right
  for (std::size_t j = 0; j + 2 < n; ++j) {
    pair_update(j, fwd_half);
    cache.left[j + 1] = update_left_environment(cache.beta(j), psi.site(j), psi.bond(j), h[j]);
    site_update(j + 1);
  }
  // rightmost pair: two consecutive half steps merged into one full step
  pair_update(n - 2, fwd_full);
  if (n == 2) return stats;

  // right to left
  cache.right[n - 2] = update_right_environment(cache.gamma(n - 1), psi.site(n - 1), psi.bond(n - 2), h[n - 1]);
  site_update(n - 2);
  for (std::size_t j = n - 2; j-- > 0;) {
    pair_update(j, fwd_half);
    if (j > 0) {
      cache.right[j] = update_right_environment(cache.gamma(j + 1), psi.site(j + 1), psi.bond(j), h[j + 1]);
      site_update(j);
    }
  }
  return stats;
}

/// Serial engine holding the state, Hamiltonian and environment cache.
class SerialTdvp {
 public:
  SerialTdvp(InvCanonicalMps psi, Mpo h, EvolutionConfig cfg)
      : psi_(std::move(psi)), h_(std::move(h)), cfg_(cfg), cache_(init_right_environments(psi_, h_)) {
    cfg_.validate();
  }

  UpdateStats step() {
    UpdateStats s = serial_timestep(psi_, h_, cache_, cfg_);
    w_total_ += s.discarded_weight;
    ++steps_;
    return s;
  }

  /// Replaces the state (e.g. after reorthonormalization) and rebuilds environments.
  void reset_state(InvCanonicalMps psi) {
    psi_ = std::move(psi);
    cache_ = init_right_environments(psi_, h_);
  }

  const InvCanonicalMps& state() const { return psi_; }
  const Mpo& hamiltonian() const { return h_; }
  const EvolutionConfig& config() const { return cfg_; }
  double w_total() const { return w_total_; }
  std::size_t steps() const { return steps_; }

 private:
  InvCanonicalMps psi_;
  Mpo h_;
  EvolutionConfig cfg_;
  EnvCache cache_;
  double w_total_ = 0.0;
  std::size_t steps_ = 0;
};

}  // namespace ptdvp
