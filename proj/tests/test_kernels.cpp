#include <gtest/gtest.h>

#include "common.hpp"
#include "ogcp/kernels.hpp"
#include "ogcp/sampling.hpp"

using namespace ogcp;
using namespace ogcp::test;

namespace {

// Explicit Khatri-Rao Z_k: rows indexed by the other modes in increasing mode
// order (earliest mode fastest), columns by rank.
GramMatrix khatri_rao_skip(const FactorList& f, std::size_t skip) {
  const Index rank = f.front().cols();
  std::vector<Index> dims;
  for (std::size_t m = 0; m < f.size(); ++m)
    if (m != skip) dims.push_back(f[m].rows());
  const Index rows = box_size(dims);
  GramMatrix z(rows, rank);
  for (Index r = 0; r < rows; ++r) {
    const auto idx = unravel(r, dims);
    for (Index j = 0; j < rank; ++j) {
      double v = 1.0;
      std::size_t p = 0;
      for (std::size_t m = 0; m < f.size(); ++m)
        if (m != skip) v *= f[m](idx[p++], j);
      z(r, j) = v;
    }
  }
  return z;
}

// Mode-k unfolding of a dense array with the same column order as above.
GramMatrix unfold(const std::vector<double>& x, const std::vector<Index>& dims,
                  std::size_t k) {
  std::vector<Index> rest;
  for (std::size_t m = 0; m < dims.size(); ++m)
    if (m != k) rest.push_back(dims[m]);
  GramMatrix out = GramMatrix::Zero(dims[k], box_size(rest));
  for (Index lin = 0; lin < box_size(dims); ++lin) {
    const auto idx = unravel(lin, dims);
    std::vector<Index> r;
    for (std::size_t m = 0; m < dims.size(); ++m)
      if (m != k) r.push_back(idx[m]);
    out(idx[k], ravel(r, rest)) = x[lin];
  }
  return out;
}

}  // namespace

TEST(Mttkrp, EmptyGivesZero) {
  std::mt19937_64 rng(1);
  const FactorList f = random_factors({3, 4}, 2, rng);
  EXPECT_TRUE(sampled_mttkrp(SparseTensor({3, 4}), f, 0).isZero());
}

TEST(Mttkrp, TwoModeIdentityCopiesRows) {
  std::mt19937_64 rng(2);
  const FactorList f = random_factors({2, 2}, 3, rng);
  const SparseTensor y({2, 2}, {0, 0, 1, 1}, {1.0, 1.0});
  const FactorMatrix out = sampled_mttkrp(y, f, 0);
  EXPECT_EQ(out, f[1]);
}

TEST(Mttkrp, MatchesUnfoldingTimesKhatriRao) {
  std::mt19937_64 rng(3);
  const std::vector<Index> dims{4, 5, 6};
  const SparseTensor y = random_sparse(dims, 0.3, LossKind::Gaussian, rng);
  const FactorList f = random_factors(dims, 3, rng, -1, 1);
  const auto dense = densify(y);
  for (std::size_t k = 0; k < 3; ++k) {
    const GramMatrix oracle = unfold(dense, dims, k) * khatri_rao_skip(f, k);
    EXPECT_LE(rel_err_mat(GramMatrix(sampled_mttkrp(y, f, k)), oracle), 1e-12);
  }
  // All-mode contraction equals Z^T vec(Y).
  const GramMatrix zfull = khatri_rao_skip(f, 99);
  Eigen::Map<const Vector> vec(dense.data(), dense.size());
  EXPECT_LE(rel_err_mat(weights_mttkrp(y, f), Vector(zfull.transpose() * vec)), 1e-12);
}

TEST(Gram, AllOnesColumn) {
  FactorList f{FactorMatrix::Ones(2, 1), FactorMatrix::Ones(3, 1), FactorMatrix::Ones(4, 1)};
  const GramMatrix g = gram(f, 0);
  ASSERT_EQ(g.rows(), 1);
  EXPECT_EQ(g(0, 0), 12.0);
}

TEST(Gram, TwoModeCrossIsOtherMode) {
  std::mt19937_64 rng(4);
  const FactorList f = random_factors({3, 4}, 2, rng);
  EXPECT_LE(rel_err_mat(gram(f, 1, &f), GramMatrix(f[0].transpose() * f[0])), 1e-15);
}

TEST(Gram, MatchesExplicitKhatriRao) {
  std::mt19937_64 rng(5);
  const FactorList a = random_factors({3, 4, 5}, 2, rng, -1, 1);
  const FactorList b = random_factors({3, 4, 5}, 2, rng, -1, 1);
  for (std::size_t k = 0; k < 3; ++k) {
    const GramMatrix za = khatri_rao_skip(a, k), zb = khatri_rao_skip(b, k);
    EXPECT_LE(rel_err_mat(gram(a, k), GramMatrix(za.transpose() * za)), 1e-12);
    EXPECT_LE(rel_err_mat(gram(a, k, &b), GramMatrix(zb.transpose() * za)), 1e-12);
  }
}

TEST(Gram, CacheMatchesDirect) {
  std::mt19937_64 rng(6);
  FactorList a = random_factors({3, 4, 5}, 3, rng);
  const FactorList old = random_factors({3, 4, 5}, 3, rng);
  GramCache cache;
  cache.refresh(a, &old);
  for (std::size_t k = 0; k < 3; ++k) {
    EXPECT_LE(rel_err_mat(cache.gram_product(k), gram(a, k)), 1e-14);
    EXPECT_LE(rel_err_mat(cache.cross_gram_product(k), gram(a, k, &old)), 1e-14);
  }
  a[1] *= 2.0;
  cache.invalidate(1);
  cache.refresh(a, &old);
  EXPECT_LE(rel_err_mat(cache.gram_product(0), gram(a, 0)), 1e-14);
  GramCache plain;
  plain.refresh(a);
  EXPECT_THROW(plain.cross_gram(0), Error);
}

TEST(KtensorInner, Examples) {
  KTensor m(Vector::Constant(1, 3.0),
            {FactorMatrix::Ones(2, 1), FactorMatrix::Ones(2, 1), FactorMatrix::Ones(2, 1)});
  EXPECT_EQ(ktensor_inner(m, m), 72.0);
  KTensor z = m;
  z.weights().setZero();
  EXPECT_EQ(ktensor_inner(m, z), 0.0);
}

TEST(KtensorInner, MatchesDense) {
  std::mt19937_64 rng(7);
  const std::vector<Index> dims{3, 2, 4};
  const KTensor a(random_weights(2, rng), random_factors(dims, 2, rng, -1, 1));
  const KTensor b(random_weights(3, rng), random_factors(dims, 3, rng, -1, 1));
  const auto da = densify(a.weights(), a.factors()), db = densify(b.weights(), b.factors());
  double oracle = 0.0;
  for (std::size_t i = 0; i < da.size(); ++i) oracle += da[i] * db[i];
  EXPECT_LE(rel_err(ktensor_inner(a, b), oracle), 1e-10);
}

TEST(HistoryPenalty, Examples) {
  std::mt19937_64 rng(8);
  const std::vector<Index> dims{3, 3, 2};
  const KTensor a(random_weights(2, rng), random_factors(dims, 2, rng));
  EXPECT_EQ(history_penalty(a, a), 0.0);
  KTensor zero = a;
  zero.weights().setZero();
  EXPECT_LE(rel_err(history_penalty(a, zero), ktensor_inner(a, a)), 1e-14);

  const KTensor b(random_weights(2, rng), random_factors(dims, 2, rng));
  const auto da = densify(a.weights(), a.factors()), db = densify(b.weights(), b.factors());
  double oracle = 0.0;
  for (std::size_t i = 0; i < da.size(); ++i) oracle += (da[i] - db[i]) * (da[i] - db[i]);
  EXPECT_LE(rel_err(history_penalty(a, b), oracle), 1e-8);
}

TEST(DenseGaussianGradient, StationaryAndZero) {
  std::mt19937_64 rng(9);
  const std::vector<Index> dims{3, 4, 2};
  const FactorList f = random_factors(dims, 2, rng);
  const Vector s = random_weights(2, rng);
  const SparseTensor x = from_dense(densify(s, f), dims);
  for (std::size_t k = 0; k < 3; ++k)
    EXPECT_LE(dense_gaussian_mttkrp_gradient(x, f, s, k).norm(), 1e-12);
  const Vector zero = Vector::Zero(2);
  EXPECT_TRUE(dense_gaussian_mttkrp_gradient(SparseTensor(dims), f, zero, 0).isZero());
}

TEST(DenseGaussianGradient, MatchesDenseDerivativeTensor) {
  std::mt19937_64 rng(10);
  const std::vector<Index> dims{3, 4, 5};
  const SparseTensor x = random_sparse(dims, 0.4, LossKind::Gaussian, rng);
  const FactorList f = random_factors(dims, 2, rng, -1, 1);
  const Vector s = random_weights(2, rng);
  const auto dx = densify(x), dm = densify(s, f);
  std::vector<double> y(dx.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = 2.0 * (dm[i] - dx[i]);
  for (std::size_t k = 0; k < 3; ++k) {
    const GramMatrix oracle = unfold(y, dims, k) * khatri_rao_skip(f, k) * s.asDiagonal();
    EXPECT_LE(rel_err_mat(GramMatrix(dense_gaussian_mttkrp_gradient(x, f, s, k)), oracle),
              1e-10);
  }
}
