#include <gtest/gtest.h>

#include <map>

#include "common.hpp"
#include "ogcp/kernels.hpp"
#include "ogcp/sampling.hpp"

using namespace ogcp;
using namespace ogcp::test;

TEST(Sampling, EmptyTensorDrawsOnlyZeros) {
  const SparseTensor x({3, 3});
  Rng rng(1);
  const SampleSet s = draw_samples(x, 0, 5, rng);
  EXPECT_EQ(s.p(), 0u);
  EXPECT_EQ(s.q(), 5u);
  EXPECT_DOUBLE_EQ(s.zero_scale * 5, 9.0);
}

TEST(Sampling, DenseTensorDrawsOnlyNonzeros) {
  const SparseTensor x({2, 2}, {0, 0, 1, 0, 0, 1, 1, 1}, {1, 2, 3, 4});
  Rng rng(2);
  const SampleSet s = draw_samples(x, 3, 0, rng);
  EXPECT_EQ(s.p(), 3u);
  EXPECT_EQ(s.q(), 0u);
  EXPECT_DOUBLE_EQ(s.nz_scale * 3, 4.0);
  EXPECT_THROW(draw_samples(x, 3, 1, rng), Error);
  EXPECT_THROW(draw_samples(SparseTensor({2, 2}), 1, 0, rng), Error);
}

TEST(Sampling, ZeroDrawsAvoidNonzerosAndScalesAreExact) {
  std::mt19937_64 gen(3);
  const SparseTensor x = random_sparse({6, 7, 5}, 0.3, LossKind::Poisson, gen);
  Rng rng(4);
  const SampleSet s = draw_samples(x, 37, 53, rng);
  EXPECT_EQ(s.nz_scale * 37, static_cast<double>(x.nnz()));
  EXPECT_EQ(s.zero_scale * 53, static_cast<double>(x.numel() - x.nnz()));
  for (std::size_t c = 0; c < s.q(); ++c) {
    const auto idx = s.zero_coord(c);
    EXPECT_FALSE(x.contains(idx));
    for (std::size_t k = 0; k < 3; ++k) {
      EXPECT_GE(idx[k], 0);
      EXPECT_LT(idx[k], x.dim(k));
    }
  }
  for (std::size_t c = 0; c < s.p(); ++c)
    EXPECT_EQ(s.nz_values[c], x.value(s.nz_ordinals[c]));
}

TEST(Sampling, PickFrequenciesAreUniform) {
  std::vector<Index> coords;
  std::vector<double> values;
  for (Index n = 0; n < 20; ++n) {
    coords.push_back(n % 10);
    coords.push_back(n / 10 * 5);
    values.push_back(1.0 + n);
  }
  const SparseTensor x({10, 10}, coords, values);
  Rng rng(5);
  const std::size_t draws = 100000;
  const SampleSet s = draw_samples(x, draws, draws, rng);
  std::vector<double> nz(20, 0.0), z(100, 0.0);
  for (auto n : s.nz_ordinals) nz[n] += 1;
  for (std::size_t c = 0; c < s.q(); ++c) {
    const auto idx = s.zero_coord(c);
    z[idx[0] + 10 * idx[1]] += 1;
  }
  std::vector<double> zero_obs, zero_exp;
  for (Index lin = 0; lin < 100; ++lin) {
    if (x.contains(std::vector<Index>{lin % 10, lin / 10})) {
      EXPECT_EQ(z[lin], 0.0);
      continue;
    }
    zero_obs.push_back(z[lin]);
    zero_exp.push_back(draws / 80.0);
  }
  ASSERT_EQ(zero_obs.size(), 80u);
  EXPECT_GT(chi_square_pvalue(nz, std::vector<double>(20, draws / 20.0)), 0.001);
  EXPECT_GT(chi_square_pvalue(zero_obs, zero_exp), 0.001);
}

TEST(Sampling, RejectionBudgetIsReported) {
  // 99 of 100 cells are nonzero: a budget of 2 rejections runs out quickly.
  std::vector<Index> coords;
  std::vector<double> values;
  for (Index lin = 1; lin < 100; ++lin) {
    coords.push_back(lin % 10);
    coords.push_back(lin / 10);
    values.push_back(1.0);
  }
  const SparseTensor x({10, 10}, coords, values);
  Rng rng(6);
  try {
    draw_samples(x, 0, 50, rng, 2);
    FAIL() << "expected a sampling error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Sampling);
    EXPECT_NE(std::string(e.what()).find("0.99"), std::string::npos);
  }
}

TEST(Objective, ConstantLossCollapse) {
  // Gaussian, model 0, every stored value 3: each term is 9.
  const SparseTensor x({2, 2}, {0, 0, 1, 0, 0, 1, 1, 1}, {3, 3, 3, 3});
  const FactorList f{FactorMatrix::Zero(2, 1), FactorMatrix::Zero(2, 1)};
  Rng rng(7);
  const SampleSet s = draw_samples(x, 7, 0, rng);
  const LossFunction loss(LossKind::Gaussian);
  EXPECT_DOUBLE_EQ(estimate_objective(x, f, Vector::Ones(1), loss, s, {}, 0, 0), 4 * 9.0);
}

TEST(Objective, ZeroTensorZeroModel) {
  const SparseTensor x({3, 3, 3});
  std::mt19937_64 gen(8);
  const FactorList f = random_factors({3, 3, 3}, 2, gen);
  Rng rng(9);
  const SampleSet s = draw_samples(x, 0, 40, rng);
  const LossFunction loss(LossKind::Poisson);
  EXPECT_EQ(estimate_objective(x, f, Vector::Zero(2), loss, s, {}, 0, 0), 0.0);
}

TEST(Objective, RegularizersAndHistoryAreExact) {
  std::mt19937_64 gen(10);
  const std::vector<Index> dims{3, 4, 2};
  const SparseTensor x = random_sparse(dims, 0.5, LossKind::Gaussian, gen);
  const FactorList f = random_factors(dims, 2, gen);
  const FactorList old = random_factors(dims, 2, gen);
  const Vector s = random_weights(2, gen);
  const std::vector<HistoryEntry> window{{1, random_weights(2, gen)}, {3, random_weights(2, gen)}};
  const HistoryTerms hist{&old, window, 0.7, 0.5, 4};
  const LossFunction loss(LossKind::Gaussian);
  Rng rng(11);
  const SampleSet samples = draw_samples(x, 20, 20, rng);

  // Dense oracle for the history term.
  double hist_oracle = 0.0;
  for (const auto& h : window) {
    const auto a = densify(h.weights, old), b = densify(h.weights, f);
    double d2 = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d2 += (a[i] - b[i]) * (a[i] - b[i]);
    hist_oracle += 0.5 * 0.7 * std::pow(0.5, static_cast<double>(4 - h.step)) * d2;
  }
  EXPECT_LE(rel_err(history_objective(f, hist), hist_oracle), 1e-10);

  double reg = 0.0;
  for (const auto& a : f) reg += a.squaredNorm();
  const double expected = sampled_loss_sum(x, f, s, loss, samples) + 0.5 * 0.3 * reg +
                          0.5 * 0.2 * s.squaredNorm() + hist_oracle;
  EXPECT_LE(rel_err(estimate_objective(x, f, s, loss, samples, hist, 0.3, 0.2), expected),
            1e-12);
}

TEST(GradientTensor, ExactFitIsZero) {
  std::mt19937_64 gen(12);
  const std::vector<Index> dims{3, 3, 2};
  const FactorList f = random_factors(dims, 2, gen);
  const Vector s = random_weights(2, gen);
  const SparseTensor x = from_dense(densify(s, f), dims);
  Rng rng(13);
  const SampleSet samples = draw_samples(x, 25, 0, rng);
  const SparseTensor y = gradient_tensor(x, f, s, LossFunction(LossKind::Gaussian), samples);
  for (double v : y.values()) EXPECT_NEAR(v, 0.0, 1e-14);
}

TEST(GradientTensor, RepeatedDrawsCollapse) {
  const SparseTensor x({2, 2}, {1, 0}, {2.0});
  const FactorList f{FactorMatrix::Constant(2, 1, 0.5), FactorMatrix::Constant(2, 1, 0.5)};
  const Vector s = Vector::Ones(1);
  Rng rng(14);
  const SampleSet samples = draw_samples(x, 3, 0, rng);
  const LossFunction loss(LossKind::Gaussian);
  const SparseTensor y = gradient_tensor(x, f, s, loss, samples);
  ASSERT_EQ(y.nnz(), 1u);
  EXPECT_EQ(y.coord(0, 0), 1);
  EXPECT_DOUBLE_EQ(y.value(0), 1.0 * loss.deriv(2.0, 0.25));
}

TEST(GradientTensor, FullTensorMatchesDenseDerivatives) {
  std::mt19937_64 gen(15);
  const std::vector<Index> dims{3, 2, 4};
  const SparseTensor x = random_sparse(dims, 0.4, LossKind::Poisson, gen);
  const FactorList f = random_factors(dims, 2, gen);
  const Vector s = random_weights(2, gen);
  const LossFunction loss(LossKind::Poisson);
  const SparseTensor y = full_gradient_tensor(x, f, s, loss);
  const auto dx = densify(x), dm = densify(s, f);
  ASSERT_EQ(static_cast<Index>(y.nnz()), box_size(dims));
  for (std::size_t n = 0; n < y.nnz(); ++n) {
    std::vector<Index> idx(y.coord(n).begin(), y.coord(n).end());
    const Index lin = ravel(idx, dims);
    EXPECT_NEAR(y.value(n), 1.0 - dx[lin] / (dm[lin] + 1e-10), 1e-12);
  }
}
