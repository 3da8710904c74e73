#pragma once

#include <cmath>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "ogcp/error.hpp"
#include "ogcp/sparse_tensor.hpp"

namespace ogcp {

/// Factor matrices are row-major: every kernel walks rows A(k)[i_k, :].
template <typename Scalar>
using FactorMatrixT =
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using VectorT = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using GramMatrixT = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using FactorListT = std::vector<FactorMatrixT<Scalar>>;

using FactorMatrix = FactorMatrixT<double>;
using Vector = VectorT<double>;
using GramMatrix = GramMatrixT<double>;
using FactorList = FactorListT<double>;

/// Kruskal tensor [[s; A(1), ..., A(d)]].
template <typename Scalar>
class KTensorT {
 public:
  KTensorT() = default;

  KTensorT(VectorT<Scalar> weights, FactorListT<Scalar> factors)
      : weights_(std::move(weights)), factors_(std::move(factors)) {
    validate();
  }

  /// Zero-initialised K-tensor of the given shape and rank with unit weights.
  static KTensorT zeros(std::span<const Index> dims, Index rank) {
    FactorListT<Scalar> f;
    for (Index n : dims) f.push_back(FactorMatrixT<Scalar>::Zero(n, rank));
    return KTensorT(VectorT<Scalar>::Ones(rank), std::move(f));
  }

  Index rank() const { return weights_.size(); }
  std::size_t ndims() const { return factors_.size(); }
  std::vector<Index> dims() const {
    std::vector<Index> out;
    for (const auto& a : factors_) out.push_back(a.rows());
    return out;
  }

  const VectorT<Scalar>& weights() const { return weights_; }
  VectorT<Scalar>& weights() { return weights_; }
  const FactorListT<Scalar>& factors() const { return factors_; }
  FactorListT<Scalar>& factors() { return factors_; }
  const FactorMatrixT<Scalar>& factor(std::size_t k) const {
    return factors_[k];
  }
  FactorMatrixT<Scalar>& factor(std::size_t k) { return factors_[k]; }

  bool all_finite() const {
    if (!weights_.allFinite()) return false;
    for (const auto& a : factors_)
      if (!a.allFinite()) return false;
    return true;
  }

  void validate() const {
    if (factors_.empty()) fail(ErrorKind::Shape, "K-tensor has no factors");
    for (std::size_t k = 0; k < factors_.size(); ++k)
      if (factors_[k].cols() != weights_.size())
        fail(ErrorKind::Shape, "factor " + std::to_string(k) + " has " +
                                   std::to_string(factors_[k].cols()) +
                                   " columns, expected rank " +
                                   std::to_string(weights_.size()));
    if (!all_finite())
      fail(ErrorKind::Domain, "K-tensor contains non-finite entries");
  }

  /// Scales every column to unit 2-norm and folds the norms into the weights.
  void normalize() {
    for (auto& a : factors_) {
      for (Index j = 0; j < a.cols(); ++j) {
        const Scalar nrm = a.col(j).norm();
        if (nrm > Scalar(0)) {
          a.col(j) /= nrm;
          weights_(j) *= nrm;
        }
      }
    }
  }

 private:
  VectorT<Scalar> weights_;
  FactorListT<Scalar> factors_;
};

using KTensor = KTensorT<double>;

/// m_i = sum_j s_j prod_k A(k)[i_k, j], with no bounds checks.
template <typename Scalar>
Scalar model_entry_unchecked(const VectorT<Scalar>& weights,
                             const FactorListT<Scalar>& factors,
                             std::span<const Index> idx) {
  const Index rank = weights.size();
  constexpr Index kStackRank = 64;
  if (rank > kStackRank) {
    Scalar sum = 0;
    for (Index j = 0; j < rank; ++j) {
      Scalar prod = weights(j);
      for (std::size_t k = 0; k < factors.size(); ++k)
        prod *= factors[k](idx[k], j);
      sum += prod;
    }
    return sum;
  }
  // Row-major factors: multiply whole contiguous rows into a stack buffer.
  Scalar prod[kStackRank];
  for (Index j = 0; j < rank; ++j) prod[j] = weights(j);
  for (std::size_t k = 0; k < factors.size(); ++k) {
    const Scalar* a = factors[k].data() + idx[k] * rank;
    for (Index j = 0; j < rank; ++j) prod[j] *= a[j];
  }
  Scalar sum = 0;
  for (Index j = 0; j < rank; ++j) sum += prod[j];
  return sum;
}

template <typename Scalar>
Scalar model_entry(const KTensorT<Scalar>& m, std::span<const Index> idx) {
  if (idx.size() != m.ndims())
    fail(ErrorKind::Index, "index arity does not match K-tensor order");
  for (std::size_t k = 0; k < idx.size(); ++k)
    if (idx[k] < 0 || idx[k] >= m.factor(k).rows())
      fail(ErrorKind::Index, "index " + std::to_string(idx[k]) +
                                 " out of bounds for mode " +
                                 std::to_string(k));
  return model_entry_unchecked(m.weights(), m.factors(), idx);
}

template <typename Scalar>
Scalar model_entry(const KTensorT<Scalar>& m,
                   std::initializer_list<Index> idx) {
  return model_entry(m, std::span<const Index>(idx.begin(), idx.size()));
}

/// Calls fn(idx) for every multi-index of the box, mode 0 fastest.
template <typename Fn>
void for_each_index(std::span<const Index> dims, Fn&& fn) {
  std::vector<Index> idx(dims.size(), 0);
  for (Index n : dims)
    if (n <= 0) return;
  while (true) {
    fn(std::span<const Index>(idx));
    std::size_t k = 0;
    for (; k < dims.size(); ++k) {
      if (++idx[k] < dims[k]) break;
      idx[k] = 0;
    }
    if (k == dims.size()) return;
  }
}

}  // namespace ogcp
