#include <gtest/gtest.h>

#include "common.hpp"
#include "ogcp/metrics.hpp"

using namespace ogcp;
using namespace ogcp::test;

TEST(LocalLoss, ExactFitIsZero) {
  std::mt19937_64 gen(1);
  const std::vector<Index> dims{3, 4, 2};
  const KTensor m(random_weights(2, gen), random_factors(dims, 2, gen));
  const SparseTensor x = from_dense(densify(m.weights(), m.factors()), dims);
  const LocalLoss l = local_loss_exact(x, m, LossFunction(LossKind::Gaussian));
  EXPECT_TRUE(l.normalized);
  EXPECT_LE(l.value, 1e-28);
}

TEST(LocalLoss, SingleEntryAgainstZeroModel) {
  const SparseTensor x({3, 3}, {1, 2}, {2.0});
  const KTensor zero = KTensor::zeros(std::vector<Index>{3, 3}, 2);
  EXPECT_DOUBLE_EQ(local_loss_exact(x, zero, LossFunction(LossKind::Gaussian)).value, 1.0);
}

TEST(LocalLoss, ExactMatchesBruteForce) {
  std::mt19937_64 gen(2);
  const std::vector<Index> dims{4, 3, 5};
  const SparseTensor x = random_sparse(dims, 0.3, LossKind::Poisson, gen);
  const KTensor m(random_weights(2, gen), random_factors(dims, 2, gen));
  const LossFunction loss(LossKind::Poisson);
  const auto dx = densify(x), dm = densify(m.weights(), m.factors());
  double sum = 0.0, norm = 0.0;
  for (std::size_t i = 0; i < dx.size(); ++i) {
    sum += loss.value(dx[i], dm[i]);
    norm += dx[i] * dx[i];
  }
  EXPECT_LE(rel_err(exact_loss_sum(x, m, loss), sum), 1e-12);
  EXPECT_LE(rel_err(local_loss_exact(x, m, loss).value, sum / norm), 1e-12);
}

TEST(LocalLoss, SampledIsCloseToExact) {
  std::mt19937_64 gen(3);
  const std::vector<Index> dims{6, 5, 4};
  const SparseTensor x = random_sparse(dims, 0.25, LossKind::Poisson, gen);
  const KTensor m(random_weights(2, gen), random_factors(dims, 2, gen));
  const LossFunction loss(LossKind::Poisson);
  const std::size_t eta = x.nnz(), zeros = static_cast<std::size_t>(x.numel()) - eta;
  Rng rng(4);
  const LocalLoss est = local_loss_sampled(x, m, loss, {50 * eta, 50 * zeros}, rng);
  const double exact = local_loss_exact(x, m, loss).value;
  EXPECT_LE(std::abs(est.value - exact), 0.05 * std::abs(exact));
}

TEST(LocalLoss, EmptySliceIsFlagged) {
  std::mt19937_64 gen(5);
  const KTensor m(random_weights(1, gen), random_factors({2, 2}, 1, gen));
  const LocalLoss l = local_loss_exact(SparseTensor({2, 2}), m, LossFunction(LossKind::Gaussian));
  EXPECT_FALSE(l.normalized);
  const auto dm = densify(m.weights(), m.factors());
  double sum = 0.0;
  for (double v : dm) sum += v * v;
  EXPECT_LE(rel_err(l.value, sum), 1e-14);
}

TEST(GlobalLoss, SingleSliceEqualsLocal) {
  std::mt19937_64 gen(6);
  const std::vector<Index> dims{4, 4};
  const FactorList f = random_factors(dims, 2, gen);
  const Vector s = random_weights(2, gen);
  const SparseTensor x = random_sparse(dims, 0.5, LossKind::Gaussian, gen);
  const LossFunction loss(LossKind::Gaussian);
  const std::vector<SparseTensor> slices{x};
  const std::vector<Vector> temporal{s};
  EXPECT_DOUBLE_EQ(global_loss(slices, f, temporal, loss),
                   local_loss_exact(x, KTensor(s, f), loss).value);
}

TEST(GlobalLoss, OrderInvariantAndChecked) {
  std::mt19937_64 gen(7);
  const std::vector<Index> dims{3, 5};
  const FactorList f = random_factors(dims, 2, gen);
  std::vector<SparseTensor> slices;
  std::vector<Vector> temporal;
  for (int t = 0; t < 4; ++t) {
    slices.push_back(random_sparse(dims, 0.6, LossKind::Gaussian, gen));
    temporal.push_back(random_weights(2, gen));
  }
  const LossFunction loss(LossKind::Gaussian);
  const double forward = global_loss(slices, f, temporal, loss);
  std::reverse(slices.begin(), slices.end());
  std::reverse(temporal.begin(), temporal.end());
  EXPECT_LE(rel_err(global_loss(slices, f, temporal, loss), forward), 1e-14);
  temporal.pop_back();
  EXPECT_THROW(global_loss(slices, f, temporal, loss), Error);
}

TEST(Congruence, IdentityPermutationAndRescale) {
  std::mt19937_64 gen(8);
  const std::vector<Index> dims{5, 4, 3};
  const KTensor a(random_weights(3, gen), random_factors(dims, 3, gen));
  EXPECT_NEAR(congruence_score(a, a), 1.0, 1e-12);

  // Reverse the components and move scale between weights and columns.
  KTensor b = a;
  for (Index j = 0; j < 3; ++j) {
    const Index r = 2 - j;
    b.weights()(r) = a.weights()(j) / 6.0;
    b.factor(0).col(r) = 2.0 * a.factor(0).col(j);
    b.factor(1).col(r) = 3.0 * a.factor(1).col(j);
    b.factor(2).col(r) = a.factor(2).col(j);
  }
  EXPECT_NEAR(congruence_score(a, b), 1.0, 1e-12);
  EXPECT_THROW(congruence_score(a, KTensor::zeros(std::vector<Index>{5, 4, 4}, 3)), Error);
}

TEST(Congruence, SignedCosineOnTwoComponentOracle) {
  // Orthogonal rank-1 components e1 and e2 in every mode.
  FactorList f(3, FactorMatrix::Zero(2, 2));
  for (auto& a : f) a(0, 0) = a(1, 1) = 1.0;
  const KTensor a(Vector::Ones(2), f);
  KTensor b = a;
  b.factor(1)(0, 0) = -1.0;
  // Component 2 matches with cosine 1, component 1 with -1: (1 - 1) / 2.
  EXPECT_NEAR(congruence_score(a, b), 0.0, 1e-15);
  // Flipping two modes of the same component restores the score.
  b.factor(2)(0, 0) = -1.0;
  EXPECT_NEAR(congruence_score(a, b), 1.0, 1e-15);
}

TEST(Congruence, WeightPenaltyAndZeroColumns) {
  FactorList f(2, FactorMatrix::Identity(2, 2));
  const KTensor a(Vector::Ones(2), f);
  KTensor b = a;
  b.weights()(0) = 2.0;
  EXPECT_NEAR(congruence_score(a, b), (0.5 + 1.0) / 2.0, 1e-15);
  KTensor z = a;
  z.factor(0).col(1).setZero();
  EXPECT_NEAR(congruence_score(a, z), 0.5, 1e-15);
}
