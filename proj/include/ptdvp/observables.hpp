#pragma once

// Benchmark observables, evaluated by full contraction of the gathered state.

#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include "ptdvp/mps.hpp"
#include "ptdvp/spin.hpp"

namespace ptdvp {

enum class ObservableKind { MagnetizationZ, MagnetizationX, ConnectedZZ, XDeviation, Dynamical };

inline std::string observable_name(ObservableKind k) {
  switch (k) {
    case ObservableKind::MagnetizationZ: return "sz";
    case ObservableKind::MagnetizationX: return "sx";
    case ObservableKind::ConnectedZZ: return "connected_zz";
    case ObservableKind::XDeviation: return "x_deviation";
    case ObservableKind::Dynamical: return "dynamical_zz";
  }
  return "?";
}

inline ObservableKind parse_observable(const std::string& s) {
  for (auto k : {ObservableKind::MagnetizationZ, ObservableKind::MagnetizationX, ObservableKind::ConnectedZZ,
                 ObservableKind::XDeviation, ObservableKind::Dynamical}) {
    if (observable_name(k) == s) return k;
  }
  throw ConfigError("unknown observable '" + s + "'");
}

/// <Z_r Z_k> - <Z_r><Z_k> for every r.
inline std::vector<cplx> connected_zz_profile(const InvCanonicalMps& psi, std::size_t k) {
  const auto zz = correlation_profile(psi, spin::sigma_z(), k, spin::sigma_z());
  const auto z = local_profile(psi, spin::sigma_z());
  std::vector<cplx> out(zz.size());
  for (std::size_t r = 0; r < zz.size(); ++r) out[r] = zz[r] - z[r] * z[k];
  return out;
}

/// |<X_r>(t) - <X_r>(0)| for every r, given the reference profile at t = 0.
inline std::vector<cplx> x_deviation_profile(const InvCanonicalMps& psi, const std::vector<cplx>& reference) {
  const auto x = local_profile(psi, spin::sigma_x());
  detail::require_shape(x.size() == reference.size(), "x_deviation_profile: reference has the wrong length");
  std::vector<cplx> out(x.size());
  for (std::size_t r = 0; r < x.size(); ++r) out[r] = std::abs(x[r] - reference[r]);
  return out;
}

/// C(r - k, t) = <psi0| Z_r(t) Z_k |psi0> = e^{+i E0 t} <psi0| Z_r |psi(t)>,
/// with psi(t) = e^{-iHt} Z_k psi0 and E0 the energy of the eigenstate psi0.
/// Both states are normalized before contraction.
inline std::vector<cplx> dynamical_correlator_profile(const InvCanonicalMps& psi0, const InvCanonicalMps& psi_t,
                                                      double e0, double t) {
  Zipper z(psi0, psi_t);
  auto v = z.local(spin::sigma_z());
  const double nrm = total_norm(psi0) * total_norm(psi_t);
  const cplx phase = std::exp(cplx(0.0, e0 * t)) / nrm;
  for (auto& x : v) x *= phase;
  return v;
}

}  // namespace ptdvp
