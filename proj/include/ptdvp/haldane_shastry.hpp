#pragma once

// Thermodynamic-limit dynamical spin-spin correlator of the Haldane-Shastry
// chain,
//   C_inf(x, t) = (-1)^x / 4 * Int_{[-1,1]^2} exp(i (Q x - E t)),
//   Q = pi l1 l2,  E = (pi^2 / 4)(l1^2 + l2^2 - 2 l1^2 l2^2).

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <complex>
#include <numbers>
#include <string>

#include "ptdvp/error.hpp"

namespace ptdvp {

enum class QuadratureScheme { Adaptive, GaussLegendre };

struct QuadratureConfig {
  QuadratureScheme scheme = QuadratureScheme::Adaptive;
  double tolerance = 1e-9;      // absolute, adaptive scheme
  unsigned max_depth = 20;      // interval bisections per dimension, adaptive scheme
  unsigned panels = 16;         // panels per dimension, Gauss-Legendre scheme (20 nodes each)

  void validate() const {
    detail::require(tolerance > 0.0, "quadrature: tolerance must be positive");
    detail::require(max_depth >= 1, "quadrature: max_depth must be >= 1");
    detail::require(panels >= 1, "quadrature: panels must be >= 1");
  }
};

inline QuadratureScheme parse_quadrature_scheme(const std::string& s) {
  if (s == "adaptive") return QuadratureScheme::Adaptive;
  if (s == "gauss_legendre") return QuadratureScheme::GaussLegendre;
  throw ConfigError("unknown quadrature scheme '" + s + "'");
}

struct QuadratureValue {
  std::complex<double> value;
  double error_estimate = 0.0;  // 0 for the fixed-order scheme
  bool reached_tolerance = true;
};

namespace detail {

inline std::complex<double> hs_integrand(double l1, double l2, double x, double t) {
  constexpr double pi = std::numbers::pi;
  const double q = pi * l1 * l2;
  const double e = 0.25 * pi * pi * (l1 * l1 + l2 * l2 - 2.0 * l1 * l1 * l2 * l2);
  const double phase = q * x - e * t;
  return {std::cos(phase), std::sin(phase)};
}

template <class F>
std::complex<double> composite_gauss(F&& f, unsigned panels) {
  using boost::math::quadrature::gauss;
  std::complex<double> sum = 0.0;
  const double h = 2.0 / panels;
  for (unsigned k = 0; k < panels; ++k) {
    const double a = -1.0 + k * h;
    sum += gauss<double, 20>::integrate(f, a, a + h);
  }
  return sum;
}

}  // namespace detail

/// C_inf(x, t). The adaptive scheme integrates over l2 inside an adaptive
/// integral over l1; the estimate adds the outer error to twice the largest
/// inner error.
inline QuadratureValue haldane_shastry_c_infinity(int x, double t, const QuadratureConfig& quad = {}) {
  quad.validate();
  detail::require(std::isfinite(t), "haldane_shastry_c_infinity: t must be finite");
  const double xd = static_cast<double>(x);
  const double sign = (x % 2 == 0) ? 0.25 : -0.25;
  QuadratureValue out;

  if (quad.scheme == QuadratureScheme::GaussLegendre) {
    auto outer = [&](double l1) {
      return detail::composite_gauss([&](double l2) { return detail::hs_integrand(l1, l2, xd, t); }, quad.panels);
    };
    out.value = sign * detail::composite_gauss(outer, quad.panels);
    return out;
  }

  using boost::math::quadrature::gauss_kronrod;
  // inner integrals have modulus <= 2, so a relative target of tol/8 keeps
  // each below tol/4 absolute
  const double rel = quad.tolerance / 8.0;
  double worst_inner = 0.0;
  auto outer = [&](double l1) {
    double err = 0.0;
    auto inner = [&](double l2) { return detail::hs_integrand(l1, l2, xd, t); };
    const auto v = gauss_kronrod<double, 15>::integrate(inner, -1.0, 1.0, quad.max_depth, rel, &err);
    worst_inner = std::max(worst_inner, err);
    return v;
  };
  double outer_err = 0.0;
  const auto v = gauss_kronrod<double, 15>::integrate(outer, -1.0, 1.0, quad.max_depth, rel, &outer_err);
  out.value = sign * v;
  out.error_estimate = 0.25 * (outer_err + 2.0 * worst_inner);
  out.reached_tolerance = out.error_estimate <= quad.tolerance;
  return out;
}

}  // namespace ptdvp
