#pragma once

// Matrix product states in the inverse canonical gauge
//
//   |psi> = Psi_0 V_0 Psi_1 V_1 ... V_{N-2} Psi_{N-1},   V_j = diag(lambda_j)^-1,
//
// where every site tensor Psi_j = Lambda_{j-1} Gamma_j Lambda_j is an
// orthogonality center. Psi_j V_j is then a left isometry and V_{j-1} Psi_j a
// right isometry.

#include <Eigen/Dense>
#include <Eigen/QR>

#include <cmath>
#include <complex>
#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "ptdvp/error.hpp"
#include "ptdvp/linalg.hpp"
#include "ptdvp/tensor.hpp"

namespace ptdvp {

/// Rank-3 site tensor with axes (chi_left, d, chi_right).
class SiteTensor {
 public:
  SiteTensor() = default;
  SiteTensor(std::size_t chi_left, std::size_t phys, std::size_t chi_right)
      : t_(Dims{chi_left, phys, chi_right}) {
    validate();
  }
  explicit SiteTensor(Tensor t) : t_(std::move(t)) { validate(); }

  std::size_t chi_left() const { return t_.dim(0); }
  std::size_t phys() const { return t_.dim(1); }
  std::size_t chi_right() const { return t_.dim(2); }

  const Tensor& tensor() const { return t_; }
  Tensor& tensor() { return t_; }

  cplx& operator()(std::size_t a, std::size_t s, std::size_t b) { return t_(a, s, b); }
  const cplx& operator()(std::size_t a, std::size_t s, std::size_t b) const { return t_(a, s, b); }

 private:
  void validate() const {
    detail::require_shape(t_.rank() == 3, "site tensor must have rank 3");
    for (auto d : t_.dims()) detail::require_shape(d >= 1, "site tensor dimensions must be >= 1");
  }
  Tensor t_;
};

/// Schmidt weights on a bond and their reciprocals (the V matrix diagonal).
struct BondWeights {
  std::vector<double> lambda;
  std::vector<double> inv;

  static BondWeights from_lambda(std::vector<double> lambda) {
    BondWeights b;
    b.inv.resize(lambda.size());
    for (std::size_t i = 0; i < lambda.size(); ++i) {
      if (!(lambda[i] > 0.0) || !std::isfinite(lambda[i]))
        throw NumericalError("bond weights must be positive and finite");
      b.inv[i] = 1.0 / lambda[i];
    }
    b.lambda = std::move(lambda);
    return b;
  }
  static BondWeights unit(std::size_t n) { return from_lambda(std::vector<double>(n, 1.0)); }

  std::size_t size() const { return lambda.size(); }
};

struct ProductStateSpec {
  std::vector<Eigen::VectorXcd> local_states;

  void validate() const {
    detail::require(!local_states.empty(), "product state needs at least one site");
    for (const auto& v : local_states) {
      detail::require(v.size() >= 1, "local state dimension must be >= 1");
      detail::require(std::abs(v.norm() - 1.0) <= 1e-12, "local state is not normalized");
    }
  }
};

class InvCanonicalMps {
 public:
  InvCanonicalMps() = default;
  InvCanonicalMps(std::vector<SiteTensor> sites, std::vector<BondWeights> bonds)
      : sites_(std::move(sites)), bonds_(std::move(bonds)) {
    validate();
  }

  std::size_t size() const { return sites_.size(); }
  const SiteTensor& site(std::size_t j) const { return sites_.at(j); }
  SiteTensor& site(std::size_t j) { return sites_.at(j); }
  const BondWeights& bond(std::size_t j) const { return bonds_.at(j); }
  BondWeights& bond(std::size_t j) { return bonds_.at(j); }
  const std::vector<SiteTensor>& sites() const { return sites_; }
  const std::vector<BondWeights>& bonds() const { return bonds_; }

  std::vector<std::size_t> phys_dims() const {
    std::vector<std::size_t> d;
    for (const auto& s : sites_) d.push_back(s.phys());
    return d;
  }

  /// Throws ShapeError if adjacent dimensions disagree.
  void validate() const {
    detail::require_shape(!sites_.empty(), "MPS needs at least one site");
    detail::require_shape(bonds_.size() + 1 == sites_.size(), "MPS needs N-1 bonds");
    detail::require_shape(sites_.front().chi_left() == 1 && sites_.back().chi_right() == 1,
                          "MPS boundary bond dimensions must be 1");
    for (std::size_t j = 0; j + 1 < sites_.size(); ++j) {
      detail::require_shape(sites_[j].chi_right() == bonds_[j].size() &&
                                bonds_[j].size() == sites_[j + 1].chi_left(),
                            "inconsistent bond dimension at bond " + std::to_string(j));
    }
  }

 private:
  std::vector<SiteTensor> sites_;
  std::vector<BondWeights> bonds_;
};

// ---------------------------------------------------------------------------
// local helpers

/// Psi_j V_j: the left-isometry form of site j (Psi_{N-1} for the last site).
inline Tensor left_form(const InvCanonicalMps& psi, std::size_t j) {
  if (j + 1 == psi.size()) return psi.site(j).tensor();
  return scale_axis(psi.site(j).tensor(), 2, psi.bond(j).inv);
}

/// V_{j-1} Psi_j: the right-isometry form of site j (Psi_0 for the first site).
inline Tensor right_form(const InvCanonicalMps& psi, std::size_t j) {
  if (j == 0) return psi.site(0).tensor();
  return scale_axis(psi.site(j).tensor(), 0, psi.bond(j - 1).inv);
}

/// T'(a, s', b) = sum_s op(s', s) T(a, s, b).
inline Tensor apply_physical(const Tensor& t, const Eigen::MatrixXcd& op) {
  detail::require_shape(t.rank() == 3 && static_cast<std::size_t>(op.cols()) == t.dim(1) &&
                            op.rows() == op.cols(),
                        "operator dimension does not match the physical leg");
  Tensor out(t.dims());
  const auto d = static_cast<Eigen::Index>(t.dim(1));
  const auto cr = static_cast<Eigen::Index>(t.dim(2));
  for (std::size_t a = 0; a < t.dim(0); ++a) {
    const auto off = static_cast<Eigen::Index>(a) * d * cr;
    Eigen::Map<const RowMatrix> in(t.data().data() + off, d, cr);
    Eigen::Map<RowMatrix> res(out.data().data() + off, d, cr);
    res.noalias() = op * in;
  }
  return out;
}

namespace detail {

/// Left zipper step: E'(a', b') = sum conj(bra(a, s', a')) op(s', s) E(a, b) ket(b, s, b').
inline Eigen::MatrixXcd transfer_left(const Eigen::MatrixXcd& e, const Tensor& bra, const Tensor& ket,
                                      const Eigen::MatrixXcd* op = nullptr) {
  RowMatrix t = e * ket.matrix(1);  // (a, s b')
  Tensor tt(Dims{bra.dim(0), ket.dim(1), ket.dim(2)}, Eigen::Map<Eigen::VectorXcd>(t.data(), t.size()));
  if (op) tt = apply_physical(tt, *op);
  return bra.matrix(2).adjoint() * tt.matrix(2);
}

/// Right zipper step: F'(a, b) = sum conj(bra(a, s', a')) op(s', s) ket(b, s, b') F(a', b').
inline Eigen::MatrixXcd transfer_right(const Eigen::MatrixXcd& f, const Tensor& bra, const Tensor& ket,
                                       const Eigen::MatrixXcd* op = nullptr) {
  RowMatrix t = ket.matrix(2) * f.transpose();  // ((b, s), a')
  Tensor tt(Dims{ket.dim(0), ket.dim(1), bra.dim(2)}, Eigen::Map<Eigen::VectorXcd>(t.data(), t.size()));
  if (op) tt = apply_physical(tt, *op);
  return bra.matrix(1).conjugate() * tt.matrix(1).transpose();
}

inline Eigen::MatrixXcd one() { return Eigen::MatrixXcd::Ones(1, 1); }

inline void require_same_shape(const InvCanonicalMps& a, const InvCanonicalMps& b) {
  detail::require_shape(a.size() == b.size() && a.phys_dims() == b.phys_dims(),
                        "MPS shapes differ (site count or physical dimensions)");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// construction

inline InvCanonicalMps from_product_state(const ProductStateSpec& spec) {
  spec.validate();
  std::vector<SiteTensor> sites;
  for (const auto& v : spec.local_states) {
    SiteTensor s(1, static_cast<std::size_t>(v.size()), 1);
    for (Eigen::Index i = 0; i < v.size(); ++i) s(0, static_cast<std::size_t>(i), 0) = v[i];
    sites.push_back(std::move(s));
  }
  std::vector<BondWeights> bonds(sites.size() - 1, BondWeights::unit(1));
  return {std::move(sites), std::move(bonds)};
}

inline Eigen::VectorXcd to_dense(const InvCanonicalMps& psi, std::size_t cap = std::size_t{1} << 16) {
  std::size_t total = 1;
  for (auto d : psi.phys_dims()) {
    total *= d;
    if (total > cap) throw ConfigError("to_dense: Hilbert space dimension exceeds cap");
  }
  RowMatrix acc = left_form(psi, 0).matrix(2);  // (d0, chi0)
  for (std::size_t j = 1; j < psi.size(); ++j) {
    const Tensor a = left_form(psi, j);
    RowMatrix next = acc * a.matrix(1);  // (D, d chi')
    acc = Eigen::Map<RowMatrix>(next.data(), next.rows() * static_cast<Eigen::Index>(a.dim(1)),
                                static_cast<Eigen::Index>(a.dim(2)));
  }
  return Eigen::Map<const Eigen::VectorXcd>(acc.data(), acc.size());
}

/// Generic MPS (bond weights all one) with Gaussian random entries, brought
/// into inverse canonical form.
inline InvCanonicalMps random_mps(const std::vector<std::size_t>& phys_dims, std::size_t chi, std::uint64_t seed);

struct OrthonormalizeResult {
  InvCanonicalMps state;
  double total_discarded = 0.0;
};

/// Left-to-right QR sweep followed by a right-to-left truncated SVD sweep.
/// The result is normalized and every site is an orthogonality center.
inline OrthonormalizeResult orthonormalize(const InvCanonicalMps& psi, const TruncationPolicy& policy) {
  psi.validate();
  policy.validate();
  const std::size_t n = psi.size();
  std::vector<Tensor> m(n);
  for (std::size_t j = 0; j < n; ++j) m[j] = left_form(psi, j);

  for (std::size_t j = 0; j + 1 < n; ++j) {
    const std::size_t cl = m[j].dim(0), d = m[j].dim(1);
    const Eigen::MatrixXcd mat = m[j].matrix(2);
    Eigen::HouseholderQR<Eigen::MatrixXcd> qr(mat);
    const Eigen::Index k = std::min(mat.rows(), mat.cols());
    const Eigen::MatrixXcd q = qr.householderQ() * Eigen::MatrixXcd::Identity(mat.rows(), k);
    const Eigen::MatrixXcd r = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
    RowMatrix qrow = q;
    m[j] = Tensor(Dims{cl, d, static_cast<std::size_t>(k)}, Eigen::Map<Eigen::VectorXcd>(qrow.data(), qrow.size()));
    RowMatrix next = r * m[j + 1].matrix(1);
    m[j + 1] = Tensor(Dims{static_cast<std::size_t>(k), m[j + 1].dim(1), m[j + 1].dim(2)},
                      Eigen::Map<Eigen::VectorXcd>(next.data(), next.size()));
  }
  const double nrm = m[n - 1].norm();
  if (!(nrm > 0.0) || !std::isfinite(nrm)) throw NumericalError("orthonormalize: zero-norm state");
  m[n - 1] *= cplx(1.0 / nrm);

  OrthonormalizeResult out;
  std::vector<BondWeights> bonds(n - 1);
  std::vector<Tensor> right(n);
  for (std::size_t j = n - 1; j >= 1; --j) {
    const std::size_t d = m[j].dim(1), cr = m[j].dim(2);
    SvdResult svd = truncated_svd(m[j].matrix(1), policy);
    out.total_discarded += svd.discarded_weight;
    Eigen::VectorXd lam = svd.weights / svd.weights.norm();
    const auto k = static_cast<std::size_t>(svd.kept_rank);
    RowMatrix vh = svd.right_isometry;
    right[j] = Tensor(Dims{k, d, cr}, Eigen::Map<Eigen::VectorXcd>(vh.data(), vh.size()));
    RowMatrix prev = m[j - 1].matrix(2) * (svd.left_isometry * lam.cast<cplx>().asDiagonal());
    m[j - 1] = Tensor(Dims{m[j - 1].dim(0), m[j - 1].dim(1), k}, Eigen::Map<Eigen::VectorXcd>(prev.data(), prev.size()));
    bonds[j - 1] = BondWeights::from_lambda(std::vector<double>(lam.data(), lam.data() + lam.size()));
  }
  std::vector<SiteTensor> sites;
  sites.emplace_back(m[0]);
  for (std::size_t j = 1; j < n; ++j) sites.emplace_back(scale_axis(right[j], 0, bonds[j - 1].lambda));
  out.state = InvCanonicalMps(std::move(sites), std::move(bonds));
  return out;
}

inline InvCanonicalMps random_mps(const std::vector<std::size_t>& phys_dims, std::size_t chi, std::uint64_t seed) {
  detail::require(!phys_dims.empty() && chi >= 1, "random_mps: need sites and chi >= 1");
  const std::size_t n = phys_dims.size();
  std::vector<std::size_t> bond(n + 1, 1);
  for (std::size_t j = 1; j < n; ++j) {
    double left = 1, right = 1;
    for (std::size_t i = 0; i < j; ++i) left *= static_cast<double>(phys_dims[i]);
    for (std::size_t i = j; i < n; ++i) right *= static_cast<double>(phys_dims[i]);
    bond[j] = static_cast<std::size_t>(std::min({static_cast<double>(chi), left, right}));
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  std::vector<SiteTensor> sites;
  for (std::size_t j = 0; j < n; ++j) {
    SiteTensor s(bond[j], phys_dims[j], bond[j + 1]);
    for (auto& x : s.tensor().data()) x = cplx(g(rng), g(rng));
    sites.push_back(std::move(s));
  }
  std::vector<BondWeights> bonds;
  for (std::size_t j = 1; j < n; ++j) bonds.push_back(BondWeights::unit(bond[j]));
  TruncationPolicy keep_all{.chi_max = chi, .w_max = 0.0, .epsilon = 0.0};
  return orthonormalize(InvCanonicalMps(std::move(sites), std::move(bonds)), keep_all).state;
}

// ---------------------------------------------------------------------------
// observables

inline cplx overlap(const InvCanonicalMps& a, const InvCanonicalMps& b) {
  detail::require_same_shape(a, b);
  Eigen::MatrixXcd e = detail::one();
  for (std::size_t j = 0; j < a.size(); ++j) e = detail::transfer_left(e, left_form(a, j), left_form(b, j));
  return e(0, 0);
}

inline double total_norm(const InvCanonicalMps& psi) { return std::sqrt(std::max(0.0, overlap(psi, psi).real())); }

/// |1 - ||psi|||, the norm error reported in run logs.
inline double norm_error(const InvCanonicalMps& psi) { return std::abs(1.0 - total_norm(psi)); }

inline double infidelity(const InvCanonicalMps& a, const InvCanonicalMps& b) {
  const double na = overlap(a, a).real();
  const double nb = overlap(b, b).real();
  if (!(na > 0.0) || !(nb > 0.0)) throw NumericalError("infidelity: zero-norm state");
  const double f = std::abs(overlap(a, b)) / std::sqrt(na * nb);
  return std::clamp(1.0 - f, 0.0, 1.0);
}

inline std::size_t max_bond(const InvCanonicalMps& psi) {
  std::size_t chi = 1;
  for (const auto& b : psi.bonds()) chi = std::max(chi, b.size());
  return chi;
}

/// <O_site> using site `site` as the orthogonality center (local cost).
inline cplx expect_local(const InvCanonicalMps& psi, const Eigen::MatrixXcd& op, std::size_t site) {
  if (site >= psi.size()) throw ConfigError("expect_local: site index out of range");
  const Tensor& t = psi.site(site).tensor();
  return inner(t, apply_physical(t, op)) / t.squared_norm();
}

/// <O_A O_B> for distinct sites, zipping from the left site (as center)
/// through right isometries to the right site.
inline cplx expect_two_point(const InvCanonicalMps& psi, const Eigen::MatrixXcd& op_a, std::size_t site_a,
                             const Eigen::MatrixXcd& op_b, std::size_t site_b) {
  if (site_a >= psi.size() || site_b >= psi.size()) throw ConfigError("expect_two_point: site out of range");
  if (site_a == site_b) throw ConfigError("expect_two_point: sites must differ");
  const bool ordered = site_a < site_b;
  const std::size_t lo = ordered ? site_a : site_b;
  const std::size_t hi = ordered ? site_b : site_a;
  const Eigen::MatrixXcd& op_lo = ordered ? op_a : op_b;
  const Eigen::MatrixXcd& op_hi = ordered ? op_b : op_a;

  const Tensor& center = psi.site(lo).tensor();
  Eigen::MatrixXcd e = Eigen::MatrixXcd::Identity(static_cast<Eigen::Index>(center.dim(0)),
                                                  static_cast<Eigen::Index>(center.dim(0)));
  e = detail::transfer_left(e, center, center, &op_lo);
  for (std::size_t j = lo + 1; j <= hi; ++j) {
    const Tensor b = right_form(psi, j);
    e = detail::transfer_left(e, b, b, j == hi ? &op_hi : nullptr);
  }
  return e.trace() / center.squared_norm();
}

/// Applies a single-site operator (gauge preserved when it is unitary).
inline InvCanonicalMps apply_site_operator(InvCanonicalMps psi, const Eigen::MatrixXcd& op, std::size_t site) {
  if (site >= psi.size()) throw ConfigError("apply_site_operator: site out of range");
  psi.site(site) = SiteTensor(apply_physical(psi.site(site).tensor(), op));
  return psi;
}

/// Cached left and right zippers of <bra|ket>, for evaluating many local
/// insertions without assuming any gauge.
class Zipper {
 public:
  Zipper(const InvCanonicalMps& bra, const InvCanonicalMps& ket) : n_(bra.size()) {
    detail::require_same_shape(bra, ket);
    for (std::size_t j = 0; j < n_; ++j) {
      bra_.push_back(left_form(bra, j));
      ket_.push_back(left_form(ket, j));
    }
    left_.resize(n_ + 1);
    right_.resize(n_ + 1);
    left_[0] = detail::one();
    for (std::size_t j = 0; j < n_; ++j) left_[j + 1] = detail::transfer_left(left_[j], bra_[j], ket_[j]);
    right_[n_] = detail::one();
    for (std::size_t j = n_; j-- > 0;) right_[j] = detail::transfer_right(right_[j + 1], bra_[j], ket_[j]);
  }

  cplx value() const { return left_[n_](0, 0); }

  /// <bra| O_r |ket> for every site r.
  std::vector<cplx> local(const Eigen::MatrixXcd& op) const {
    std::vector<cplx> out(n_);
    for (std::size_t r = 0; r < n_; ++r)
      out[r] = close(detail::transfer_left(left_[r], bra_[r], ket_[r], &op), right_[r + 1]);
    return out;
  }

  /// <bra| O_k P_r |ket> for every site r (r == k uses the product O P).
  std::vector<cplx> correlation(const Eigen::MatrixXcd& op_k, std::size_t k, const Eigen::MatrixXcd& op_r) const {
    if (k >= n_) throw ConfigError("correlation: site out of range");
    std::vector<cplx> out(n_);
    const Eigen::MatrixXcd prod = op_k * op_r;
    out[k] = close(detail::transfer_left(left_[k], bra_[k], ket_[k], &prod), right_[k + 1]);
    // r < k: right zipper carrying O_k
    Eigen::MatrixXcd g = detail::transfer_right(right_[k + 1], bra_[k], ket_[k], &op_k);
    for (std::size_t r = k; r-- > 0;) {
      out[r] = close(detail::transfer_left(left_[r], bra_[r], ket_[r], &op_r), g);
      g = detail::transfer_right(g, bra_[r], ket_[r]);
    }
    // r > k: left zipper carrying O_k
    Eigen::MatrixXcd h = detail::transfer_left(left_[k], bra_[k], ket_[k], &op_k);
    for (std::size_t r = k + 1; r < n_; ++r) {
      out[r] = close(detail::transfer_left(h, bra_[r], ket_[r], &op_r), right_[r + 1]);
      h = detail::transfer_left(h, bra_[r], ket_[r]);
    }
    return out;
  }

 private:
  static cplx close(const Eigen::MatrixXcd& l, const Eigen::MatrixXcd& r) { return (l.array() * r.array()).sum(); }

  std::size_t n_;
  std::vector<Tensor> bra_, ket_;
  std::vector<Eigen::MatrixXcd> left_, right_;
};

/// <O_r>/<psi|psi> for every r, by full contraction (no gauge assumption).
inline std::vector<cplx> local_profile(const InvCanonicalMps& psi, const Eigen::MatrixXcd& op) {
  Zipper z(psi, psi);
  auto v = z.local(op);
  const cplx nrm = z.value();
  for (auto& x : v) x /= nrm;
  return v;
}

/// <O_k P_r>/<psi|psi> for every r, by full contraction.
inline std::vector<cplx> correlation_profile(const InvCanonicalMps& psi, const Eigen::MatrixXcd& op_k, std::size_t k,
                                             const Eigen::MatrixXcd& op_r) {
  Zipper z(psi, psi);
  auto v = z.correlation(op_k, k, op_r);
  const cplx nrm = z.value();
  for (auto& x : v) x /= nrm;
  return v;
}

/// max_j | <psi|psi> - ||Psi_j||^2 |: zero when every site is an orthogonality center.
inline double gauge_error(const InvCanonicalMps& psi) {
  const double nrm = overlap(psi, psi).real();
  double err = 0.0;
  for (const auto& s : psi.sites()) err = std::max(err, std::abs(nrm - s.tensor().squared_norm()));
  return err;
}

}  // namespace ptdvp
