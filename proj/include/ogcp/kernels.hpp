#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ogcp/error.hpp"
#include "ogcp/ktensor.hpp"
#include "ogcp/sparse_tensor.hpp"

// Multilinear kernels for CP gradients. Every Z_k^T Z_k style product is
// formed as a Hadamard product of per-mode Grams; Khatri-Rao products are
// never materialised.

namespace ogcp {

namespace detail {

template <typename Scalar>
void check_factor_list(const FactorListT<Scalar>& factors) {
  if (factors.empty()) fail(ErrorKind::Shape, "empty factor list");
  const Index rank = factors.front().cols();
  for (const auto& a : factors)
    if (a.cols() != rank)
      fail(ErrorKind::Shape, "factor matrices disagree on rank");
}

template <typename Scalar, typename Tensor>
void check_tensor_factors(const Tensor& y, const FactorListT<Scalar>& factors) {
  check_factor_list(factors);
  if (y.ndims() != factors.size())
    fail(ErrorKind::Shape, "tensor order " + std::to_string(y.ndims()) +
                               " does not match " +
                               std::to_string(factors.size()) + " factors");
  for (std::size_t k = 0; k < factors.size(); ++k)
    if (y.dim(k) != factors[k].rows())
      fail(ErrorKind::Shape, "mode " + std::to_string(k) + " has size " +
                                 std::to_string(y.dim(k)) +
                                 " but factor has " +
                                 std::to_string(factors[k].rows()) + " rows");
}

template <typename Scalar>
void check_same_shape(const FactorListT<Scalar>& a,
                      const FactorListT<Scalar>& b) {
  if (a.size() != b.size())
    fail(ErrorKind::Shape, "factor lists differ in order");
  for (std::size_t k = 0; k < a.size(); ++k)
    if (a[k].rows() != b[k].rows() || a[k].cols() != b[k].cols())
      fail(ErrorKind::Shape, "factor " + std::to_string(k) +
                                 " shapes differ between factor lists");
}

}  // namespace detail

/// MTTKRP of a sparse tensor: out[i_k, j] = sum_n y_n prod_{m!=k} A(m)[i_m, j].
template <typename Scalar>
FactorMatrixT<Scalar> sampled_mttkrp(const SparseTensorT<Scalar>& y,
                                     const FactorListT<Scalar>& factors,
                                     std::size_t mode) {
  detail::check_tensor_factors(y, factors);
  if (mode >= factors.size())
    fail(ErrorKind::Shape, "mttkrp mode out of range");
  const Index rank = factors.front().cols();
  const std::size_t d = factors.size();
  FactorMatrixT<Scalar> out = FactorMatrixT<Scalar>::Zero(y.dim(mode), rank);
  std::vector<Scalar> row(rank);
  // Factors are row-major, so each factor row is a contiguous run of R values.
  for (std::size_t n = 0; n < y.nnz(); ++n) {
    const auto idx = y.coord(n);
    std::fill(row.begin(), row.end(), y.value(n));
    for (std::size_t m = 0; m < d; ++m) {
      if (m == mode) continue;
      const Scalar* a = factors[m].data() + idx[m] * rank;
      for (Index j = 0; j < rank; ++j) row[j] *= a[j];
    }
    Scalar* o = out.data() + idx[mode] * rank;
    for (Index j = 0; j < rank; ++j) o[j] += row[j];
  }
  return out;
}

/// Z^T y: out[j] = sum_n y_n prod_k A(k)[i_k, j]; the temporal-weight gradient.
template <typename Scalar>
VectorT<Scalar> weights_mttkrp(const SparseTensorT<Scalar>& y,
                               const FactorListT<Scalar>& factors) {
  detail::check_tensor_factors(y, factors);
  const Index rank = factors.front().cols();
  VectorT<Scalar> out = VectorT<Scalar>::Zero(rank);
  std::vector<Scalar> row(rank);
  for (std::size_t n = 0; n < y.nnz(); ++n) {
    const auto idx = y.coord(n);
    std::fill(row.begin(), row.end(), y.value(n));
    for (std::size_t m = 0; m < factors.size(); ++m) {
      const Scalar* a = factors[m].data() + idx[m] * rank;
      for (Index j = 0; j < rank; ++j) row[j] *= a[j];
    }
    for (Index j = 0; j < rank; ++j) out(j) += row[j];
  }
  return out;
}

/// Hadamard product over m != skip of B(m)^T A(m). With skip >= d this is the
/// product over every mode.
template <typename Scalar>
GramMatrixT<Scalar> hadamard_gram(const FactorListT<Scalar>& a,
                                  const FactorListT<Scalar>& b,
                                  std::size_t skip) {
  detail::check_factor_list(a);
  detail::check_same_shape(a, b);
  const Index rank = a.front().cols();
  GramMatrixT<Scalar> g = GramMatrixT<Scalar>::Ones(rank, rank);
  for (std::size_t m = 0; m < a.size(); ++m) {
    if (m == skip) continue;
    g.array() *= (b[m].transpose() * a[m]).array();
  }
  return g;
}

/// Z_{B,k}^T Z_{A,k} = Hadamard over m != k of B(m)^T A(m); B defaults to A.
template <typename Scalar>
GramMatrixT<Scalar> gram(const FactorListT<Scalar>& factors, std::size_t mode,
                         const FactorListT<Scalar>* other = nullptr) {
  if (mode >= factors.size()) fail(ErrorKind::Shape, "gram mode out of range");
  return hadamard_gram(factors, other ? *other : factors, mode);
}

/// <M1, M2> = s1^T (Hadamard_k A1(k)^T A2(k)) s2.
template <typename Scalar>
Scalar ktensor_inner(const KTensorT<Scalar>& m1, const KTensorT<Scalar>& m2) {
  if (m1.ndims() != m2.ndims())
    fail(ErrorKind::Shape, "K-tensors differ in order");
  for (std::size_t k = 0; k < m1.ndims(); ++k)
    if (m1.factor(k).rows() != m2.factor(k).rows())
      fail(ErrorKind::Shape, "K-tensors differ in mode " + std::to_string(k));
  const Index r1 = m1.rank(), r2 = m2.rank();
  GramMatrixT<Scalar> g = GramMatrixT<Scalar>::Ones(r1, r2);
  for (std::size_t k = 0; k < m1.ndims(); ++k)
    g.array() *= (m1.factor(k).transpose() * m2.factor(k)).array();
  return m1.weights().dot(g * m2.weights());
}

/// ||M_old - M||_F^2 without densifying, clamped at 0 against roundoff.
template <typename Scalar>
Scalar history_penalty(const KTensorT<Scalar>& m_old,
                       const KTensorT<Scalar>& m) {
  const Scalar v = ktensor_inner(m_old, m_old) - 2 * ktensor_inner(m_old, m) +
                   ktensor_inner(m, m);
  return std::max(v, Scalar(0));
}

/// Exact gaussian GCP gradient w.r.t. A(k) before regularization and history:
/// 2 (A(k) diag(s) Z^T Z diag(s) - X_(k) Z diag(s)).
template <typename Scalar>
FactorMatrixT<Scalar> dense_gaussian_mttkrp_gradient(
    const SparseTensorT<Scalar>& x, const FactorListT<Scalar>& factors,
    const VectorT<Scalar>& s, std::size_t mode) {
  detail::check_tensor_factors(x, factors);
  if (s.size() != factors.front().cols())
    fail(ErrorKind::Shape, "weight vector length does not match rank");
  const GramMatrixT<Scalar> g = gram(factors, mode);
  const GramMatrixT<Scalar> sgs = s.asDiagonal() * g * s.asDiagonal();
  FactorMatrixT<Scalar> out = factors[mode] * sgs;
  out -= sampled_mttkrp(x, factors, mode) * s.asDiagonal();
  return Scalar(2) * out;
}

/// Per-mode Grams A(k)^T A(k) and cross-Grams A_old(k)^T A(k).
template <typename Scalar>
class GramCacheT {
 public:
  GramCacheT() = default;

  /// Recomputes every stale mode. Cross-Grams are kept only when old factors
  /// are supplied.
  void refresh(const FactorListT<Scalar>& factors,
               const FactorListT<Scalar>* old_factors = nullptr) {
    const std::size_t d = factors.size();
    if (grams_.size() != d) {
      grams_.assign(d, {});
      cross_.assign(d, {});
      valid_.assign(d, false);
    }
    if (old_factors) detail::check_same_shape(factors, *old_factors);
    has_cross_ = old_factors != nullptr;
    for (std::size_t k = 0; k < d; ++k) {
      if (valid_[k]) continue;
      grams_[k] = factors[k].transpose() * factors[k];
      if (old_factors) cross_[k] = (*old_factors)[k].transpose() * factors[k];
      valid_[k] = true;
    }
  }

  void invalidate(std::size_t k) { valid_.at(k) = false; }
  void invalidate_all() { std::fill(valid_.begin(), valid_.end(), false); }
  bool valid(std::size_t k) const { return valid_.at(k); }

  const GramMatrixT<Scalar>& gram(std::size_t k) const { return grams_.at(k); }
  const GramMatrixT<Scalar>& cross_gram(std::size_t k) const {
    if (!has_cross_) fail(ErrorKind::Contract, "cross-Grams not computed");
    return cross_.at(k);
  }
  bool has_cross() const { return has_cross_; }

  /// Hadamard over m != skip of the per-mode Grams (skip >= d: all modes).
  GramMatrixT<Scalar> gram_product(std::size_t skip) const {
    return product(grams_, skip);
  }
  GramMatrixT<Scalar> cross_gram_product(std::size_t skip) const {
    if (!has_cross_) fail(ErrorKind::Contract, "cross-Grams not computed");
    return product(cross_, skip);
  }

 private:
  static GramMatrixT<Scalar> product(const std::vector<GramMatrixT<Scalar>>& gs,
                                     std::size_t skip) {
    const Index rank = gs.front().rows();
    GramMatrixT<Scalar> out = GramMatrixT<Scalar>::Ones(rank, rank);
    for (std::size_t m = 0; m < gs.size(); ++m)
      if (m != skip) out.array() *= gs[m].array();
    return out;
  }

  std::vector<GramMatrixT<Scalar>> grams_;
  std::vector<GramMatrixT<Scalar>> cross_;
  std::vector<bool> valid_;
  bool has_cross_ = false;
};

using GramCache = GramCacheT<double>;

}  // namespace ogcp
