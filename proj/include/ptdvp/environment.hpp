#pragma once

// Effective environments. beta_j contracts sites 0..j-1 and gamma_j contracts
// sites j+1..N-1, each with the MPO and the conjugate state. Axis order is
// (bra bond, MPO bond, ket bond).

#include <optional>
#include <vector>

#include "ptdvp/error.hpp"
#include "ptdvp/mpo.hpp"
#include "ptdvp/mps.hpp"

namespace ptdvp {

enum class EnvSide { Left, Right };

struct Environment {
  Tensor data;
  EnvSide side = EnvSide::Left;
  std::size_t site = 0;  // the site this environment is adjacent to

  std::size_t chi() const { return data.dim(0); }
  std::size_t m() const { return data.dim(1); }
};

inline Environment left_boundary() { return {detail::unit_environment(), EnvSide::Left, 0}; }
inline Environment right_boundary(std::size_t n) { return {detail::unit_environment(), EnvSide::Right, n - 1}; }

/// beta_{j+1} from beta_j, absorbing A_j = Psi_j V_j on ket and bra layers.
inline Environment update_left_environment(const Environment& beta, const SiteTensor& psi, const BondWeights& v,
                                           const MpoTensor& w) {
  detail::require_shape(beta.side == EnvSide::Left, "update_left_environment: need a left environment");
  detail::require_shape(beta.chi() == psi.chi_left() && beta.m() == w.m_left() && psi.chi_right() == v.size() &&
                            psi.phys() == w.phys(),
                        "update_left_environment: shape mismatch");
  const Tensor a = scale_axis(psi.tensor(), 2, v.inv);
  return {detail::absorb_left(beta.data, a, w.tensor(), a), EnvSide::Left, beta.site + 1};
}

/// As above for the last site of a chain, whose right bond carries no weights.
inline Environment update_left_environment(const Environment& beta, const Tensor& a, const MpoTensor& w) {
  detail::require_shape(beta.chi() == a.dim(0) && beta.m() == w.m_left(), "update_left_environment: shape mismatch");
  return {detail::absorb_left(beta.data, a, w.tensor(), a), EnvSide::Left, beta.site + 1};
}

/// gamma_{j-1} from gamma_j, absorbing B_j = V_{j-1} Psi_j on ket and bra layers.
inline Environment update_right_environment(const Environment& gamma, const SiteTensor& psi, const BondWeights& v_prev,
                                            const MpoTensor& w) {
  detail::require_shape(gamma.side == EnvSide::Right, "update_right_environment: need a right environment");
  detail::require_shape(gamma.chi() == psi.chi_right() && gamma.m() == w.m_right() && psi.chi_left() == v_prev.size() &&
                            psi.phys() == w.phys(),
                        "update_right_environment: shape mismatch");
  const Tensor b = scale_axis(psi.tensor(), 0, v_prev.inv);
  return {detail::absorb_right(gamma.data, b, w.tensor(), b), EnvSide::Right, gamma.site - 1};
}

/// Environments indexed by site: left[j] = beta_j, right[j] = gamma_j.
struct EnvCache {
  std::vector<std::optional<Environment>> left, right;

  EnvCache() = default;
  explicit EnvCache(std::size_t n) : left(n), right(n) {}

  std::size_t size() const { return left.size(); }

  const Environment& beta(std::size_t j) const {
    if (j >= left.size() || !left[j]) throw ConfigError("environment cache: beta_" + std::to_string(j) + " missing");
    return *left[j];
  }
  const Environment& gamma(std::size_t j) const {
    if (j >= right.size() || !right[j]) throw ConfigError("environment cache: gamma_" + std::to_string(j) + " missing");
    return *right[j];
  }
};

namespace detail {
inline void check_shapes(const InvCanonicalMps& psi, const Mpo& h) {
  require_shape(psi.size() == h.size() && psi.phys_dims() == h.phys_dims(), "MPS and MPO shapes differ");
}
}  // namespace detail

/// gamma_{N-1} (trivial) down to gamma_0, plus the trivial beta_0: the cache
/// a left-to-right sweep starts from.
inline EnvCache init_right_environments(const InvCanonicalMps& psi, const Mpo& h) {
  detail::check_shapes(psi, h);
  const std::size_t n = psi.size();
  EnvCache cache(n);
  cache.left[0] = left_boundary();
  cache.right[n - 1] = right_boundary(n);
  for (std::size_t j = n - 1; j-- > 0;)
    cache.right[j] = update_right_environment(*cache.right[j + 1], psi.site(j + 1), psi.bond(j), h[j + 1]);
  return cache;
}

/// beta_0 (trivial) up to beta_{N-1}, plus the trivial gamma_{N-1}.
inline EnvCache init_left_environments(const InvCanonicalMps& psi, const Mpo& h) {
  detail::check_shapes(psi, h);
  const std::size_t n = psi.size();
  EnvCache cache(n);
  cache.left[0] = left_boundary();
  cache.right[n - 1] = right_boundary(n);
  for (std::size_t j = 0; j + 1 < n; ++j)
    cache.left[j + 1] = update_left_environment(*cache.left[j], psi.site(j), psi.bond(j), h[j]);
  return cache;
}

/// Closes beta_j, site j (as center) and gamma_j: <psi|H|psi> when Psi_j is an
/// exact orthogonality center and the environments are current.
inline cplx close_environments(const Environment& beta, const SiteTensor& psi, const MpoTensor& w,
                               const Environment& gamma) {
  const Tensor e = detail::absorb_left(beta.data, psi.tensor(), w.tensor(), psi.tensor());
  return inner(gamma.data.conj(), e);
}

}  // namespace ptdvp
