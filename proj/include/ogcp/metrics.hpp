#pragma once

#include <span>
#include <vector>

#include "ogcp/ktensor.hpp"
#include "ogcp/loss.hpp"
#include "ogcp/rng.hpp"
#include "ogcp/sampling.hpp"
#include "ogcp/sparse_tensor.hpp"

namespace ogcp {

/// Loss of a model on one slice divided by ||X_t||_F^2. Empty slices cannot
/// be normalized; their raw loss is returned with `normalized == false`.
struct LocalLoss {
  double value = 0.0;
  bool normalized = true;
};

/// sum over every cell (zeros included) of f(x, m).
double exact_loss_sum(const SparseTensor& x, const KTensor& model,
                      const LossFunction& loss);

LocalLoss local_loss_exact(const SparseTensor& x, const KTensor& model,
                           const LossFunction& loss);

/// Stratified estimate of the same quantity, without history or
/// regularization terms.
LocalLoss local_loss_sampled(const SparseTensor& x, const KTensor& model,
                             const LossFunction& loss,
                             const SampleCounts& counts, Rng& rng,
                             std::size_t max_rejects = 0);

/// Back-test of final factors against every slice: the mean over slices of
/// the exact local loss of [[s_t; final factors]].
double global_loss(std::span<const SparseTensor> slices,
                   const FactorList& factors,
                   std::span<const Vector> temporal_weights,
                   const LossFunction& loss);

/// Component-matched congruence of two K-tensors in [-1, 1].
///
/// Columns are normalized with their norms folded into the weights. Pairs are
/// matched greedily by descending product of (signed) column cosines, and each
/// matched pair contributes (1 - |l1 - l2| / max(l1, l2)) * prod_k cos_k. The
/// sum is divided by max(R1, R2), so unmatched components count as zero.
double congruence_score(const KTensor& a, const KTensor& b);

}  // namespace ogcp
