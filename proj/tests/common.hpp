#pragma once

// Shared fixtures and brute-force oracles. The oracles deliberately avoid the
// library's kernels: they walk the full index box with their own linear
// indexing and form dense arrays explicitly.

#include <cmath>
#include <random>
#include <vector>

#include "ogcp/ktensor.hpp"
#include "ogcp/loss.hpp"
#include "ogcp/sparse_tensor.hpp"

namespace ogcp::test {

inline FactorList random_factors(const std::vector<Index>& dims, Index rank,
                                 std::mt19937_64& rng, double lo = 0.0,
                                 double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  FactorList f;
  for (Index n : dims) {
    FactorMatrix a(n, rank);
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < rank; ++j) a(i, j) = u(rng);
    f.push_back(a);
  }
  return f;
}

inline Vector random_weights(Index rank, std::mt19937_64& rng, double lo = 0.5,
                             double hi = 1.5) {
  std::uniform_real_distribution<double> u(lo, hi);
  Vector s(rank);
  for (Index j = 0; j < rank; ++j) s(j) = u(rng);
  return s;
}

inline Index box_size(const std::vector<Index>& dims) {
  Index n = 1;
  for (Index d : dims) n *= d;
  return n;
}

// Multi-index of cell `lin`, mode 0 fastest.
inline std::vector<Index> unravel(Index lin, const std::vector<Index>& dims) {
  std::vector<Index> idx(dims.size());
  for (std::size_t k = 0; k < dims.size(); ++k) {
    idx[k] = lin % dims[k];
    lin /= dims[k];
  }
  return idx;
}

inline Index ravel(const std::vector<Index>& idx, const std::vector<Index>& dims) {
  Index lin = 0, stride = 1;
  for (std::size_t k = 0; k < dims.size(); ++k) {
    lin += idx[k] * stride;
    stride *= dims[k];
  }
  return lin;
}

// Random sparse tensor whose values suit `kind`: normals for gaussian, counts
// 1..4 for poisson, ones for bernoulli.
inline SparseTensor random_sparse(const std::vector<Index>& dims, double density,
                                  LossKind kind, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_int_distribution<int> c(1, 4);
  std::vector<Index> coords;
  std::vector<double> values;
  const Index n = box_size(dims);
  for (Index lin = 0; lin < n; ++lin) {
    if (u(rng) >= density) continue;
    double v = 1.0;
    if (kind == LossKind::Gaussian) v = g(rng);
    if (kind == LossKind::Poisson) v = c(rng);
    if (v == 0.0) continue;
    const auto idx = unravel(lin, dims);
    coords.insert(coords.end(), idx.begin(), idx.end());
    values.push_back(v);
  }
  return SparseTensor(dims, coords, values);
}

// Dense copy of a sparse tensor, mode 0 fastest.
inline std::vector<double> densify(const SparseTensor& x) {
  std::vector<double> out(static_cast<std::size_t>(box_size(x.dims())), 0.0);
  for (std::size_t n = 0; n < x.nnz(); ++n) {
    std::vector<Index> idx(x.coord(n).begin(), x.coord(n).end());
    out[ravel(idx, x.dims())] = x.value(n);
  }
  return out;
}

// Dense model by explicit expansion of every rank-one term.
inline std::vector<double> densify(const Vector& s, const FactorList& f) {
  std::vector<Index> dims;
  for (const auto& a : f) dims.push_back(a.rows());
  const Index n = box_size(dims);
  std::vector<double> out(static_cast<std::size_t>(n), 0.0);
  for (Index lin = 0; lin < n; ++lin) {
    const auto idx = unravel(lin, dims);
    for (Index j = 0; j < s.size(); ++j) {
      double term = s(j);
      for (std::size_t k = 0; k < f.size(); ++k) term *= f[k](idx[k], j);
      out[lin] += term;
    }
  }
  return out;
}

inline SparseTensor from_dense(const std::vector<double>& v, const std::vector<Index>& dims) {
  std::vector<Index> coords;
  std::vector<double> values;
  for (Index lin = 0; lin < static_cast<Index>(v.size()); ++lin) {
    if (v[lin] == 0.0) continue;
    const auto idx = unravel(lin, dims);
    coords.insert(coords.end(), idx.begin(), idx.end());
    values.push_back(v[lin]);
  }
  return SparseTensor(dims, coords, values);
}

inline double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300});
}

template <typename A, typename B>
double rel_err_mat(const A& a, const B& b) {
  const double denom = std::max(a.norm(), b.norm());
  return denom == 0.0 ? 0.0 : (a - b).norm() / denom;
}

// Upper tail of the chi-square distribution with k degrees of freedom,
// via the regularized incomplete gamma series / continued fraction.
inline double chi_square_sf(double x, double k) {
  const double a = k / 2.0, z = x / 2.0;
  if (z <= 0) return 1.0;
  const double lg = std::lgamma(a);
  if (z < a + 1.0) {
    double sum = 1.0 / a, term = sum;
    for (int n = 1; n < 10000; ++n) {
      term *= z / (a + n);
      sum += term;
      if (term < sum * 1e-15) break;
    }
    return 1.0 - sum * std::exp(-z + a * std::log(z) - lg);
  }
  double b = z + 1.0 - a, c = 1e300, d = 1.0 / b, h = d;
  for (int i = 1; i < 10000; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < 1e-300) d = 1e-300;
    c = b + an / c;
    if (std::abs(c) < 1e-300) c = 1e-300;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < 1e-15) break;
  }
  return std::exp(-z + a * std::log(z) - lg) * h;
}

inline double chi_square_pvalue(const std::vector<double>& observed,
                                const std::vector<double>& expected) {
  double stat = 0.0;
  for (std::size_t i = 0; i < observed.size(); ++i)
    stat += (observed[i] - expected[i]) * (observed[i] - expected[i]) / expected[i];
  return chi_square_sf(stat, static_cast<double>(observed.size() - 1));
}

}  // namespace ogcp::test
