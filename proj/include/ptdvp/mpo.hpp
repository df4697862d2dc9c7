#pragma once

// Matrix product operators for the long-range spin-chain benchmarks.
//
// Long-range couplings J(r) ~ sum_k c_k x_k^(r-1) are encoded by the usual
// finite-state automaton: state 0 is "nothing placed yet", state m-1 is
// "interaction completed", and every (term, exponential) pair owns one
// decay channel c with W[0,c] = A, W[c,c] = x_k 1, W[c,m-1] = prefactor c_k B.
// Tensor axes are (w_left, sigma_out, tau_in, w_right).

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "ptdvp/error.hpp"
#include "ptdvp/expfit.hpp"
#include "ptdvp/mps.hpp"
#include "ptdvp/spin.hpp"
#include "ptdvp/tensor.hpp"

namespace ptdvp {

class MpoTensor {
 public:
  MpoTensor() = default;
  MpoTensor(std::size_t m_left, std::size_t d, std::size_t m_right) : t_(Dims{m_left, d, d, m_right}) {}
  explicit MpoTensor(Tensor t) : t_(std::move(t)) {
    detail::require_shape(t_.rank() == 4 && t_.dim(1) == t_.dim(2), "MPO tensor must be (m, d, d, m')");
  }

  std::size_t m_left() const { return t_.dim(0); }
  std::size_t phys() const { return t_.dim(1); }
  std::size_t m_right() const { return t_.dim(3); }
  const Tensor& tensor() const { return t_; }
  Tensor& tensor() { return t_; }

  /// Writes `op` into the operator-valued entry (wl, wr).
  void set_block(std::size_t wl, std::size_t wr, const Eigen::MatrixXcd& op) {
    for (std::size_t s = 0; s < phys(); ++s)
      for (std::size_t t = 0; t < phys(); ++t)
        t_(wl, s, t, wr) = op(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(t));
  }

 private:
  Tensor t_;
};

class Mpo {
 public:
  Mpo() = default;
  explicit Mpo(std::vector<MpoTensor> w) : w_(std::move(w)) {
    detail::require_shape(!w_.empty(), "MPO needs at least one site");
    detail::require_shape(w_.front().m_left() == 1 && w_.back().m_right() == 1, "MPO boundary bonds must be 1");
    for (std::size_t j = 0; j + 1 < w_.size(); ++j)
      detail::require_shape(w_[j].m_right() == w_[j + 1].m_left(), "inconsistent MPO bond " + std::to_string(j));
  }

  std::size_t size() const { return w_.size(); }
  const MpoTensor& operator[](std::size_t j) const { return w_.at(j); }
  const std::vector<MpoTensor>& tensors() const { return w_; }

  std::size_t max_bond() const {
    std::size_t m = 1;
    for (const auto& w : w_) m = std::max(m, w.m_right());
    return m;
  }

  std::vector<std::size_t> phys_dims() const {
    std::vector<std::size_t> d;
    for (const auto& w : w_) d.push_back(w.phys());
    return d;
  }

 private:
  std::vector<MpoTensor> w_;
};

enum class Model { IsingLR, XYLR, XXXLR, IsingNN };

inline std::string model_name(Model m) {
  switch (m) {
    case Model::IsingLR: return "ising_lr";
    case Model::XYLR: return "xy_lr";
    case Model::XXXLR: return "xxx_lr";
    case Model::IsingNN: return "ising_nn";
  }
  return "?";
}

inline Model parse_model(const std::string& s) {
  for (Model m : {Model::IsingLR, Model::XYLR, Model::XXXLR, Model::IsingNN})
    if (model_name(m) == s) return m;
  throw ConfigError("unknown model '" + s + "' (expected ising_lr, xy_lr, xxx_lr or ising_nn)");
}

struct ModelSpec {
  Model model = Model::IsingLR;
  double alpha = 2.0;    // ignored for IsingNN
  double field_B = 0.0;  // transverse field (Ising models)
  double delta_B = 0.0;  // XY symmetry-breaking field, ground-state searches only
  std::size_t n_sites = 2;
  std::size_t n_exps = 1;

  void validate() const {
    detail::require(n_sites >= 2, "model needs at least two sites");
    if (model != Model::IsingNN) {
      detail::require(alpha > 0.0 && std::isfinite(alpha), "alpha must be positive and finite");
      detail::require(n_exps >= 1, "n_exps must be >= 1");
    }
    detail::require(std::isfinite(field_B) && std::isfinite(delta_B), "fields must be finite");
  }
};

/// One two-body term prefactor * sum_{i<j} J(|i-j|) A_i B_j.
struct PairTerm {
  Eigen::MatrixXcd a, b;
  double prefactor;
};

/// Two-body terms of the model (NN Ising has a single unit-coupling term).
inline std::vector<PairTerm> pair_terms(const ModelSpec& spec) {
  using namespace spin;
  switch (spec.model) {
    case Model::IsingLR:
    case Model::IsingNN: return {{sigma_z(), sigma_z(), -1.0}};
    case Model::XYLR: return {{sigma_x(), sigma_x(), 0.5}, {sigma_y(), sigma_y(), 0.5}};
    case Model::XXXLR: return {{sigma_x(), sigma_x(), 0.25}, {sigma_y(), sigma_y(), 0.25}, {sigma_z(), sigma_z(), 0.25}};
  }
  return {};
}

inline Eigen::MatrixXcd onsite_term(const ModelSpec& spec) {
  switch (spec.model) {
    case Model::IsingLR:
    case Model::IsingNN: return -spec.field_B * spin::sigma_x();
    case Model::XYLR: return 0.5 * spec.delta_B * spin::sigma_x();
    case Model::XXXLR: return Eigen::MatrixXcd::Zero(2, 2);
  }
  return {};
}

/// Number of long-range operator pairs n_H.
inline std::size_t n_long_range_terms(Model m) {
  switch (m) {
    case Model::IsingLR: return 1;
    case Model::XYLR: return 2;
    case Model::XXXLR: return 3;
    case Model::IsingNN: return 0;
  }
  return 0;
}

namespace detail {

inline Mpo assemble(std::size_t n, std::size_t m, const std::vector<std::pair<std::size_t, std::size_t>>& entries,
                    const std::vector<Eigen::MatrixXcd>& ops) {
  std::vector<MpoTensor> w;
  for (std::size_t j = 0; j < n; ++j) {
    const bool first = j == 0, last = j + 1 == n;
    MpoTensor t(first ? 1 : m, 2, last ? 1 : m);
    for (std::size_t e = 0; e < entries.size(); ++e) {
      auto [wl, wr] = entries[e];
      if (first && wl != 0) continue;
      if (last && wr != m - 1) continue;
      t.set_block(first ? 0 : wl, last ? 0 : wr, ops[e]);
    }
    w.push_back(std::move(t));
  }
  return Mpo(std::move(w));
}

}  // namespace detail

/// Builds the MPO of `spec`. Long-range models take their couplings from
/// `fit` (which must hold spec.n_exps exponentials); IsingNN ignores it.
inline Mpo build_mpo(const ModelSpec& spec, const ExpSumFit* fit) {
  spec.validate();
  const Eigen::MatrixXcd id = spin::identity();
  const auto terms = pair_terms(spec);
  std::vector<std::pair<std::size_t, std::size_t>> entries;
  std::vector<Eigen::MatrixXcd> ops;
  auto add = [&](std::size_t wl, std::size_t wr, Eigen::MatrixXcd op) {
    entries.emplace_back(wl, wr);
    ops.push_back(std::move(op));
  };

  std::size_t m = 0;
  if (spec.model == Model::IsingNN) {
    m = 3;
    add(0, 1, terms[0].a);
    add(1, 2, terms[0].prefactor * terms[0].b);
  } else {
    detail::require(fit != nullptr, "long-range model needs an exponential fit");
    detail::require(fit->n_exps() == spec.n_exps, "fit has " + std::to_string(fit->n_exps()) +
                                                      " exponentials but the model expects " +
                                                      std::to_string(spec.n_exps));
    m = n_long_range_terms(spec.model) * spec.n_exps + 2;
    std::size_t c = 1;
    for (const auto& term : terms) {
      for (std::size_t k = 0; k < spec.n_exps; ++k, ++c) {
        add(0, c, term.a);
        add(c, c, fit->rates[k] * id);
        add(c, m - 1, term.prefactor * fit->coefficients[k] * term.b);
      }
    }
  }
  add(0, 0, id);
  add(m - 1, m - 1, id);
  add(0, m - 1, onsite_term(spec));
  return detail::assemble(spec.n_sites, m, entries, ops);
}

/// Sum of the single-site operator `op` over all sites (m = 2).
inline Mpo sum_of_local(std::size_t n, const Eigen::MatrixXcd& op) {
  detail::require(n >= 1, "MPO needs at least one site");
  if (n == 1) {
    MpoTensor t(1, static_cast<std::size_t>(op.rows()), 1);
    t.set_block(0, 0, op);
    return Mpo({t});
  }
  return detail::assemble(n, 2, {{0, 0}, {1, 1}, {0, 1}}, {spin::identity(), spin::identity(), op});
}

/// Identity operator as a bond-dimension-1 MPO.
inline Mpo identity_mpo(const std::vector<std::size_t>& phys_dims) {
  std::vector<MpoTensor> w;
  for (auto d : phys_dims) {
    MpoTensor t(1, d, 1);
    t.set_block(0, 0, Eigen::MatrixXcd::Identity(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d)));
    w.push_back(std::move(t));
  }
  return Mpo(std::move(w));
}

/// The zero operator as a bond-dimension-1 MPO.
inline Mpo zero_mpo(const std::vector<std::size_t>& phys_dims) {
  std::vector<MpoTensor> w;
  for (auto d : phys_dims) w.emplace_back(1, d, 1);
  return Mpo(std::move(w));
}

inline Eigen::MatrixXcd mpo_to_dense(const Mpo& h, std::size_t cap = std::size_t{1} << 12) {
  std::size_t total = 1;
  for (auto d : h.phys_dims()) {
    total *= d;
    if (total > cap) throw ConfigError("mpo_to_dense: Hilbert space dimension exceeds cap");
  }
  // acc axes (out, in, w)
  const Tensor& w0 = h[0].tensor();
  Tensor acc = w0.reshaped(Dims{w0.dim(1), w0.dim(2), w0.dim(3)});
  for (std::size_t j = 1; j < h.size(); ++j) {
    const Tensor& w = h[j].tensor();
    Tensor t = permute(contract(acc, {2}, w, {0}), {0, 2, 1, 3, 4});
    acc = std::move(t).reshaped(Dims{acc.dim(0) * w.dim(1), acc.dim(1) * w.dim(2), w.dim(3)});
  }
  RowMatrix m = acc.reshaped(Dims{acc.dim(0), acc.dim(1)}).matrix(1);
  return m;
}

namespace detail {

/// E'(a', w', b') = sum conj(bra(a, s, a')) E(a, w, b) W(w, s, t, w') ket(b, t, b').
inline Tensor absorb_left(const Tensor& e, const Tensor& bra, const Tensor& w, const Tensor& ket) {
  const Tensor t1 = contract(e, {2}, ket, {0});          // (a, w, t, b')
  const Tensor t2 = contract(t1, {1, 2}, w, {0, 2});     // (a, b', s, w')
  const Tensor t3 = contract(bra.conj(), {0, 1}, t2, {0, 2});  // (a', b', w')
  return permute(t3, {0, 2, 1});
}

/// F'(a, w, b) = sum conj(bra(a, s, a')) W(w, s, t, w') ket(b, t, b') F(a', w', b').
inline Tensor absorb_right(const Tensor& f, const Tensor& bra, const Tensor& w, const Tensor& ket) {
  const Tensor t1 = contract(ket, {2}, f, {2});          // (b, t, a', w')
  const Tensor t2 = contract(t1, {1, 3}, w, {2, 3});     // (b, a', w, s)
  const Tensor t3 = contract(bra.conj(), {1, 2}, t2, {3, 1});  // (a, b, w)
  return permute(t3, {0, 2, 1});
}

inline Tensor unit_environment() { return Tensor(Dims{1, 1, 1}, Eigen::VectorXcd::Ones(1)); }

}  // namespace detail

/// <psi|H|psi> / <psi|psi> by a single left-to-right zipper (no gauge assumption).
inline cplx expectation(const InvCanonicalMps& psi, const Mpo& h) {
  detail::require_shape(psi.size() == h.size() && psi.phys_dims() == h.phys_dims(), "expectation: MPS/MPO shape mismatch");
  Tensor e = detail::unit_environment();
  for (std::size_t j = 0; j < psi.size(); ++j) {
    const Tensor a = left_form(psi, j);
    e = detail::absorb_left(e, a, h[j].tensor(), a);
  }
  return e(0, 0, 0) / overlap(psi, psi);
}

}  // namespace ptdvp
