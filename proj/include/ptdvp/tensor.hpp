#pragma once

// Dense complex tensors stored row-major, with permutation and tensordot-style
// contraction lowered onto Eigen matrix products.

#include <Eigen/Dense>

#include <algorithm>
#include <complex>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "ptdvp/error.hpp"

namespace ptdvp {

using cplx = std::complex<double>;
using Dims = std::vector<std::size_t>;
using RowMatrix = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline std::size_t product(std::span<const std::size_t> dims) {
  return std::accumulate(dims.begin(), dims.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string dims_string(const Dims& dims) {
  std::string s = "(";
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(dims[i]);
  }
  return s + ")";
}

class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(Dims dims) : dims_(std::move(dims)), data_(Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(product(dims_)))) {}

  Tensor(Dims dims, Eigen::VectorXcd data) : dims_(std::move(dims)), data_(std::move(data)) {
    detail::require_shape(static_cast<std::size_t>(data_.size()) == product(dims_),
                          "tensor data size does not match dims " + dims_string(dims_));
  }

  std::size_t rank() const { return dims_.size(); }
  std::size_t dim(std::size_t axis) const { return dims_.at(axis); }
  const Dims& dims() const { return dims_; }
  std::size_t size() const { return static_cast<std::size_t>(data_.size()); }
  bool empty() const { return data_.size() == 0; }

  Eigen::VectorXcd& data() { return data_; }
  const Eigen::VectorXcd& data() const { return data_; }

  template <typename... I>
  cplx& operator()(I... idx) {
    return data_[offset({static_cast<std::size_t>(idx)...})];
  }
  template <typename... I>
  const cplx& operator()(I... idx) const {
    return data_[offset({static_cast<std::size_t>(idx)...})];
  }

  /// Row-major matrix view grouping the first `split` axes into rows.
  Eigen::Map<RowMatrix> matrix(std::size_t split) {
    auto [r, c] = split_sizes(split);
    return {data_.data(), r, c};
  }
  Eigen::Map<const RowMatrix> matrix(std::size_t split) const {
    auto [r, c] = split_sizes(split);
    return {data_.data(), r, c};
  }

  Tensor reshaped(Dims dims) const& { return Tensor(std::move(dims), data_); }
  Tensor reshaped(Dims dims) && { return Tensor(std::move(dims), std::move(data_)); }

  Tensor conj() const { return Tensor(dims_, data_.conjugate()); }
  double norm() const { return data_.norm(); }
  double squared_norm() const { return data_.squaredNorm(); }

  bool all_finite() const { return data_.allFinite(); }

  Tensor& operator*=(cplx s) {
    data_ *= s;
    return *this;
  }

 private:
  std::size_t offset(std::initializer_list<std::size_t> idx) const {
    std::size_t off = 0;
    std::size_t axis = 0;
    for (std::size_t i : idx) off = off * dims_[axis++] + i;
    return off;
  }

  std::pair<Eigen::Index, Eigen::Index> split_sizes(std::size_t split) const {
    detail::require_shape(split <= dims_.size(), "matrix split beyond tensor rank");
    std::size_t r = product(std::span(dims_).first(split));
    std::size_t c = product(std::span(dims_).subspan(split));
    return {static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)};
  }

  Dims dims_;
  Eigen::VectorXcd data_;
};

inline Tensor operator*(cplx s, Tensor t) {
  t *= s;
  return t;
}

/// Axis permutation: result.dim(i) == t.dim(perm[i]).
inline Tensor permute(const Tensor& t, const std::vector<std::size_t>& perm) {
  const std::size_t n = t.rank();
  detail::require_shape(perm.size() == n, "permutation length differs from tensor rank");
  bool identity = true;
  for (std::size_t i = 0; i < n; ++i) identity = identity && perm[i] == i;
  if (identity) return t;

  std::vector<std::size_t> src_stride(n, 1);
  for (std::size_t i = n; i-- > 1;) src_stride[i - 1] = src_stride[i] * t.dim(i);

  Dims out_dims(n);
  std::vector<std::size_t> stride(n);
  for (std::size_t i = 0; i < n; ++i) {
    out_dims[i] = t.dim(perm[i]);
    stride[i] = src_stride[perm[i]];
  }
  Tensor out(out_dims);
  if (out.empty()) return out;

  const cplx* src = t.data().data();
  cplx* dst = out.data().data();
  const std::size_t inner = out_dims[n - 1];
  const std::size_t inner_stride = stride[n - 1];
  std::vector<std::size_t> idx(n, 0);
  std::size_t base = 0;
  const std::size_t outer = out.size() / inner;
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t k = 0; k < inner; ++k) *dst++ = src[base + k * inner_stride];
    // advance odometer over all axes but the last
    for (std::size_t a = n - 1; a-- > 0;) {
      base += stride[a];
      if (++idx[a] < out_dims[a]) break;
      base -= stride[a] * out_dims[a];
      idx[a] = 0;
    }
  }
  return out;
}

/// Tensordot: contracts axes_a of `a` with axes_b of `b` pairwise. The result
/// carries the free axes of `a` (in order) followed by the free axes of `b`.
inline Tensor contract(const Tensor& a, const std::vector<std::size_t>& axes_a, const Tensor& b,
                       const std::vector<std::size_t>& axes_b) {
  detail::require_shape(axes_a.size() == axes_b.size(), "contract: axis lists differ in length");
  for (std::size_t i = 0; i < axes_a.size(); ++i) {
    detail::require_shape(a.dim(axes_a[i]) == b.dim(axes_b[i]),
                          "contract: dimension mismatch " + dims_string(a.dims()) + " vs " +
                              dims_string(b.dims()));
  }
  auto free_axes = [](std::size_t rank, const std::vector<std::size_t>& used) {
    std::vector<std::size_t> f;
    for (std::size_t i = 0; i < rank; ++i)
      if (std::find(used.begin(), used.end(), i) == used.end()) f.push_back(i);
    return f;
  };
  const auto free_a = free_axes(a.rank(), axes_a);
  const auto free_b = free_axes(b.rank(), axes_b);

  std::vector<std::size_t> perm_a = free_a;
  perm_a.insert(perm_a.end(), axes_a.begin(), axes_a.end());
  std::vector<std::size_t> perm_b = axes_b;
  perm_b.insert(perm_b.end(), free_b.begin(), free_b.end());

  const Tensor pa = permute(a, perm_a);
  const Tensor pb = permute(b, perm_b);

  Dims out_dims;
  for (auto i : free_a) out_dims.push_back(a.dim(i));
  for (auto i : free_b) out_dims.push_back(b.dim(i));

  Tensor out(out_dims);
  const auto ma = pa.matrix(free_a.size());
  const auto mb = pb.matrix(axes_b.size());
  Eigen::Map<RowMatrix> mo(out.data().data(), ma.rows(), mb.cols());
  mo.noalias() = ma * mb;
  return out;
}

/// Multiplies slice i of `axis` by factors[i].
inline Tensor scale_axis(Tensor t, std::size_t axis, std::span<const double> factors) {
  detail::require_shape(axis < t.rank() && factors.size() == t.dim(axis), "scale_axis: size mismatch");
  std::size_t inner = product(std::span(t.dims()).subspan(axis + 1));
  std::size_t outer = product(std::span(t.dims()).first(axis));
  const std::size_t n = t.dim(axis);
  cplx* p = t.data().data();
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t i = 0; i < n; ++i) {
      const double f = factors[i];
      for (std::size_t k = 0; k < inner; ++k) *p++ *= f;
    }
  return t;
}

/// <a, b> = sum conj(a) * b over all entries.
inline cplx inner(const Tensor& a, const Tensor& b) {
  detail::require_shape(a.dims() == b.dims(), "inner: shape mismatch");
  return a.data().dot(b.data());
}

}  // namespace ptdvp
