#include "ogcp/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

namespace ogcp {

double exact_loss_sum(const SparseTensor& x, const KTensor& model,
                      const LossFunction& loss) {
  if (model.dims() != x.dims())
    fail(ErrorKind::Shape, "model and tensor dims differ");
  double total = 0.0;
  for_each_index(x.dims(), [&](std::span<const Index> idx) {
    const auto n = x.find(idx);
    const double xv = n ? x.value(*n) : 0.0;
    total += loss.value(xv, model_entry_unchecked(model.weights(),
                                                  model.factors(), idx));
  });
  return total;
}

namespace {

LocalLoss normalize(const SparseTensor& x, double raw) {
  const double norm2 = x.frobenius_norm_squared();
  if (norm2 > 0.0) return {raw / norm2, true};
  return {raw, false};
}

}  // namespace

LocalLoss local_loss_exact(const SparseTensor& x, const KTensor& model,
                           const LossFunction& loss) {
  return normalize(x, exact_loss_sum(x, model, loss));
}

LocalLoss local_loss_sampled(const SparseTensor& x, const KTensor& model,
                             const LossFunction& loss,
                             const SampleCounts& counts, Rng& rng,
                             std::size_t max_rejects) {
  SampleCounts c = counts;
  c.nonzeros = x.nnz() == 0 ? 0 : c.resolved_nonzeros(x.nnz());
  if (static_cast<Index>(x.nnz()) == x.numel()) c.zeros = 0;
  const SampleSet s = draw_samples(x, c, rng, max_rejects);
  return normalize(
      x, sampled_loss_sum(x, model.factors(), model.weights(), loss, s));
}

double global_loss(std::span<const SparseTensor> slices,
                   const FactorList& factors,
                   std::span<const Vector> temporal_weights,
                   const LossFunction& loss) {
  if (temporal_weights.size() < slices.size())
    fail(ErrorKind::Contract, "global loss needs temporal weights for all " +
                                  std::to_string(slices.size()) + " slices, got " +
                                  std::to_string(temporal_weights.size()));
  if (slices.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t t = 0; t < slices.size(); ++t) {
    const KTensor model(temporal_weights[t], factors);
    total += local_loss_exact(slices[t], model, loss).value;
  }
  return total / static_cast<double>(slices.size());
}

double congruence_score(const KTensor& a, const KTensor& b) {
  if (a.ndims() != b.ndims() || a.dims() != b.dims())
    fail(ErrorKind::Shape, "congruence requires K-tensors of equal dims");
  const std::size_t d = a.ndims();

  // Unit columns, weights absorb norms; a negative weight flips column 0.
  auto prepare = [d](const KTensor& m) {
    KTensor n = m;
    n.normalize();
    for (Index j = 0; j < n.rank(); ++j) {
      bool zero = false;
      for (std::size_t k = 0; k < d; ++k)
        if (m.factor(k).col(j).norm() == 0.0) zero = true;
      if (zero) {
        n.weights()(j) = 0.0;
        for (auto& f : n.factors()) f.col(j).setZero();
      } else if (n.weights()(j) < 0) {
        n.weights()(j) = -n.weights()(j);
        n.factor(0).col(j) *= -1.0;
      }
    }
    return n;
  };
  const KTensor na = prepare(a), nb = prepare(b);
  const Index ra = na.rank(), rb = nb.rank();

  GramMatrix cosines = GramMatrix::Ones(ra, rb);
  for (std::size_t k = 0; k < d; ++k)
    cosines.array() *= (na.factor(k).transpose() * nb.factor(k)).array();

  std::vector<std::tuple<double, Index, Index>> pairs;
  for (Index i = 0; i < ra; ++i)
    for (Index j = 0; j < rb; ++j) pairs.emplace_back(cosines(i, j), i, j);
  std::stable_sort(pairs.begin(), pairs.end(), [](const auto& x, const auto& y) {
    return std::get<0>(x) > std::get<0>(y);
  });

  std::vector<bool> used_a(ra, false), used_b(rb, false);
  double total = 0.0;
  for (const auto& [c, i, j] : pairs) {
    if (used_a[i] || used_b[j]) continue;
    used_a[i] = used_b[j] = true;
    const double la = na.weights()(i), lb = nb.weights()(j);
    const double top = std::max(la, lb);
    if (top <= 0.0) continue;
    total += (1.0 - std::abs(la - lb) / top) * c;
  }
  return total / static_cast<double>(std::max(ra, rb));
}

}  // namespace ogcp
