#pragma once

// Sums of decaying exponentials approximating a kernel on r = 1..R:
//
//   f(r) ~ sum_k c_k x_k^(r-1),   0 < x_k < 1.
//
// Initial rates come from a matrix-pencil (Hankel) shift-invariance estimate,
// then all 2k parameters are refined by Levenberg-Marquardt on the unweighted
// squared error. Rates are parameterized as x = exp(-exp(u)) so they stay in
// (0, 1) throughout the refinement.

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "ptdvp/error.hpp"

namespace ptdvp {

struct ExpSumFit {
  std::vector<double> coefficients;
  std::vector<double> rates;
  std::size_t fit_range = 0;  // R: the fit covers r = 1..R
  double alpha = std::numeric_limits<double>::quiet_NaN();  // NaN for arbitrary targets
  double max_abs_error = 0.0;
  double max_rel_error = 0.0;
  double squared_error = 0.0;
  bool converged = false;

  std::size_t n_exps() const { return rates.size(); }

  double operator()(double r) const {
    double s = 0.0;
    for (std::size_t k = 0; k < rates.size(); ++k) s += coefficients[k] * std::pow(rates[k], r - 1.0);
    return s;
  }
};

struct FitOptions {
  int max_iterations = 2000;
  double relative_tolerance = 1e-15;
};

namespace detail {

inline Eigen::VectorXd power_law_target(double alpha, std::size_t range) {
  Eigen::VectorXd f(static_cast<Eigen::Index>(range));
  for (std::size_t r = 1; r <= range; ++r) f[static_cast<Eigen::Index>(r - 1)] = std::pow(static_cast<double>(r), -alpha);
  return f;
}

inline Eigen::MatrixXd vandermonde(const std::vector<double>& rates, Eigen::Index rows) {
  Eigen::MatrixXd a(rows, static_cast<Eigen::Index>(rates.size()));
  for (Eigen::Index k = 0; k < a.cols(); ++k) {
    double p = 1.0;
    for (Eigen::Index r = 0; r < rows; ++r) {
      a(r, k) = p;
      p *= rates[static_cast<std::size_t>(k)];
    }
  }
  return a;
}

inline std::vector<double> linear_coefficients(const std::vector<double>& rates, const Eigen::VectorXd& f) {
  const Eigen::MatrixXd a = vandermonde(rates, f.size());
  const Eigen::VectorXd c = a.completeOrthogonalDecomposition().solve(f);
  return {c.data(), c.data() + c.size()};
}

inline double clamp_rate(double x) { return std::clamp(x, 1e-6, 1.0 - 1e-9); }

/// Decay rates from the shift invariance of the Hankel matrix column space.
/// Returns nothing when the sequence is too short for a pencil of this size.
inline std::optional<std::vector<double>> pencil_rates(const Eigen::VectorXd& f, std::size_t k) {
  const auto big_r = static_cast<Eigen::Index>(f.size());
  const auto cols = static_cast<Eigen::Index>(k + 2);
  const Eigen::Index rows = big_r - cols + 1;
  const auto kk = static_cast<Eigen::Index>(k);
  if (rows < kk + 1) return std::nullopt;
  Eigen::MatrixXd h(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) h(i, j) = f[i + j];
  Eigen::BDCSVD<Eigen::MatrixXd> svd(h, Eigen::ComputeThinU);
  const Eigen::MatrixXd u = svd.matrixU().leftCols(kk);
  const Eigen::MatrixXd top = u.topRows(rows - 1);
  const Eigen::MatrixXd bot = u.bottomRows(rows - 1);
  const Eigen::MatrixXd shift = top.completeOrthogonalDecomposition().solve(bot);
  Eigen::EigenSolver<Eigen::MatrixXd> es(shift, false);
  std::vector<double> rates;
  for (Eigen::Index i = 0; i < kk; ++i) {
    const double x = std::abs(es.eigenvalues()[i]);
    if (!std::isfinite(x)) return std::nullopt;
    rates.push_back(clamp_rate(x));
  }
  return rates;
}

/// Decay lengths spread logarithmically over [0.5, R].
inline std::vector<double> spread_rates(std::size_t k, std::size_t range) {
  std::vector<double> rates;
  const double lo = std::log(0.5), hi = std::log(static_cast<double>(std::max<std::size_t>(range, 2)));
  for (std::size_t i = 0; i < k; ++i) {
    const double t = k == 1 ? 0.5 : static_cast<double>(i) / static_cast<double>(k - 1);
    rates.push_back(clamp_rate(std::exp(-1.0 / std::exp(lo + t * (hi - lo)))));
  }
  return rates;
}

struct LmState {
  std::vector<double> c, x;
  double cost = 0.0;
  bool converged = false;
};

inline Eigen::VectorXd residual(const std::vector<double>& c, const std::vector<double>& x, const Eigen::VectorXd& f) {
  Eigen::VectorXd res = -f;
  for (std::size_t k = 0; k < x.size(); ++k) {
    double p = c[k];
    for (Eigen::Index r = 0; r < f.size(); ++r) {
      res[r] += p;
      p *= x[k];
    }
  }
  return res;
}

inline LmState levenberg_marquardt(std::vector<double> c, std::vector<double> x, const Eigen::VectorXd& f,
                                   const FitOptions& opt) {
  const auto k = static_cast<Eigen::Index>(x.size());
  const Eigen::Index n = f.size();
  std::vector<double> u(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) u[i] = std::log(-std::log(x[i]));

  auto rates_of = [](const std::vector<double>& uu) {
    std::vector<double> xx(uu.size());
    for (std::size_t i = 0; i < uu.size(); ++i) xx[i] = std::exp(-std::exp(uu[i]));
    return xx;
  };

  Eigen::VectorXd res = residual(c, x, f);
  double cost = res.squaredNorm();
  double mu = 1e-3;
  int stalls = 0;
  LmState out;
  for (int it = 0; it < opt.max_iterations; ++it) {
    Eigen::MatrixXd jac(n, 2 * k);
    for (Eigen::Index i = 0; i < k; ++i) {
      const double xi = x[static_cast<std::size_t>(i)];
      const double ci = c[static_cast<std::size_t>(i)];
      const double eu = std::exp(u[static_cast<std::size_t>(i)]);
      double p = 1.0;
      for (Eigen::Index r = 0; r < n; ++r) {
        jac(r, i) = p;
        jac(r, k + i) = -ci * static_cast<double>(r) * p * eu;
        p *= xi;
      }
    }
    const Eigen::VectorXd scale = jac.colwise().norm().transpose().cwiseMax(1e-300);

    bool accepted = false;
    for (int attempt = 0; attempt < 30 && !accepted; ++attempt) {
      // min |J d + res|^2 + mu |D d|^2 via QR of the stacked system
      Eigen::MatrixXd aug(n + 2 * k, 2 * k);
      aug.topRows(n) = jac;
      aug.bottomRows(2 * k) = (std::sqrt(mu) * scale).asDiagonal();
      Eigen::VectorXd rhs(n + 2 * k);
      rhs.head(n) = -res;
      rhs.tail(2 * k).setZero();
      const Eigen::VectorXd step = aug.colPivHouseholderQr().solve(rhs);

      std::vector<double> c2 = c, u2 = u;
      for (Eigen::Index i = 0; i < k; ++i) {
        c2[static_cast<std::size_t>(i)] += step[i];
        u2[static_cast<std::size_t>(i)] += step[k + i];
      }
      const std::vector<double> x2 = rates_of(u2);
      const Eigen::VectorXd res2 = residual(c2, x2, f);
      const double cost2 = res2.squaredNorm();
      if (std::isfinite(cost2) && cost2 < cost) {
        const double gain = (cost - cost2) / cost;
        c = std::move(c2);
        u = u2;
        x = x2;
        res = res2;
        cost = cost2;
        mu = std::max(mu / 3.0, 1e-15);
        accepted = true;
        stalls = gain < opt.relative_tolerance ? stalls + 1 : 0;
      } else {
        mu *= 4.0;
      }
    }
    if (!accepted || stalls >= 5 || cost == 0.0) {
      out.converged = true;
      break;
    }
  }
  out.c = std::move(c);
  out.x = std::move(x);
  out.cost = cost;
  return out;
}

}  // namespace detail

/// Recomputes the error metrics of `fit` against `target` (r = 1..target.size()).
inline void refresh_errors(ExpSumFit& fit, const Eigen::VectorXd& target) {
  fit.max_abs_error = 0.0;
  fit.max_rel_error = 0.0;
  fit.squared_error = 0.0;
  for (Eigen::Index i = 0; i < target.size(); ++i) {
    const double err = std::abs(fit(static_cast<double>(i + 1)) - target[i]);
    fit.max_abs_error = std::max(fit.max_abs_error, err);
    if (target[i] != 0.0) fit.max_rel_error = std::max(fit.max_rel_error, err / std::abs(target[i]));
    fit.squared_error += err * err;
  }
}

/// Fits an arbitrary target sequence f(1..R) with `n_exps` exponentials.
/// `warm_start`, if given, is tried as an additional starting point.
inline ExpSumFit fit_exponentials(const Eigen::VectorXd& target, std::size_t n_exps, const FitOptions& opt = {},
                                  const ExpSumFit* warm_start = nullptr) {
  detail::require(n_exps >= 1, "fit_exponentials: need at least one exponential");
  detail::require(static_cast<std::size_t>(target.size()) >= n_exps, "fit_exponentials: n_exps exceeds the fit range");
  detail::require(target.allFinite(), "fit_exponentials: non-finite target");

  std::vector<std::vector<double>> starts;
  if (auto p = detail::pencil_rates(target, n_exps)) starts.push_back(*p);
  starts.push_back(detail::spread_rates(n_exps, static_cast<std::size_t>(target.size())));

  std::vector<std::pair<std::vector<double>, std::vector<double>>> seeds;
  for (auto& r : starts) seeds.emplace_back(detail::linear_coefficients(r, target), r);
  if (warm_start && warm_start->n_exps() + 1 == n_exps) {
    // previous solution plus one new long-range channel with zero weight
    auto c = warm_start->coefficients;
    auto x = warm_start->rates;
    c.push_back(0.0);
    x.push_back(detail::clamp_rate(1.0 - 1.0 / static_cast<double>(target.size())));
    seeds.emplace_back(std::move(c), std::move(x));
  }

  detail::LmState best;
  best.cost = std::numeric_limits<double>::infinity();
  for (auto& [c, x] : seeds) {
    auto s = detail::levenberg_marquardt(c, x, target, opt);
    if (s.cost < best.cost) best = std::move(s);
  }
  if (!std::isfinite(best.cost)) throw NumericalError("fit_exponentials: no finite fit found");

  ExpSumFit fit;
  // order channels by decreasing rate (longest range first)
  std::vector<std::size_t> idx(best.x.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return best.x[a] > best.x[b]; });
  for (auto i : idx) {
    fit.coefficients.push_back(best.c[i]);
    fit.rates.push_back(best.x[i]);
  }
  fit.fit_range = static_cast<std::size_t>(target.size());
  fit.converged = best.converged;
  refresh_errors(fit, target);
  return fit;
}

/// Fits r^-alpha on r = 1..range. Solutions for 1..n_exps exponentials are
/// built in turn, each warm-starting the next, so the squared error never
/// increases with the number of exponentials.
inline ExpSumFit fit_power_law(double alpha, std::size_t range, std::size_t n_exps, const FitOptions& opt = {}) {
  detail::require(alpha > 0.0 && std::isfinite(alpha), "fit_power_law: alpha must be positive and finite");
  detail::require(range >= n_exps && n_exps >= 1, "fit_power_law: need 1 <= n_exps <= range");
  const Eigen::VectorXd target = detail::power_law_target(alpha, range);
  ExpSumFit fit = fit_exponentials(target, 1, opt);
  for (std::size_t k = 2; k <= n_exps; ++k) fit = fit_exponentials(target, k, opt, &fit);
  fit.alpha = alpha;
  return fit;
}

}  // namespace ptdvp
