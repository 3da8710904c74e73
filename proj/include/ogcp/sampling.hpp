#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "ogcp/ktensor.hpp"
#include "ogcp/loss.hpp"
#include "ogcp/rng.hpp"
#include "ogcp/sparse_tensor.hpp"

namespace ogcp {

/// Sentinel draw count meaning "as many draws as there are nonzeros".
inline constexpr std::size_t kAllNonzeros =
    std::numeric_limits<std::size_t>::max();

/// Stratified draw counts for one estimator.
struct SampleCounts {
  std::size_t nonzeros = 0;
  std::size_t zeros = 0;

  /// Nonzero count with kAllNonzeros replaced by the tensor's nnz.
  std::size_t resolved_nonzeros(std::size_t nnz) const {
    return nonzeros == kAllNonzeros ? nnz : nonzeros;
  }
};

struct SamplerConfig {
  SampleCounts objective{100000, 100000};  // p', q'
  SampleCounts gradient{1000, 1000};       // p, q
  std::uint64_t seed = 1;
  /// Total zero-candidate rejections allowed per draw; 0 means 1000*q.
  std::size_t max_rejects = 0;
};

/// Stratified draws from one tensor. Repeated coordinates appear repeatedly,
/// which encodes the multiplicities.
struct SampleSet {
  std::size_t order = 0;
  std::vector<std::size_t> nz_ordinals;
  std::vector<double> nz_values;
  std::vector<Index> zero_coords;  // q*order, flattened
  double nz_scale = 0.0;           // eta / p
  double zero_scale = 0.0;         // (omega - eta) / q
  std::size_t rejections = 0;

  std::size_t p() const { return nz_ordinals.size(); }
  std::size_t q() const { return order == 0 ? 0 : zero_coords.size() / order; }
  std::span<const Index> zero_coord(std::size_t c) const {
    return {zero_coords.data() + c * order, order};
  }
};

/// Draws p nonzeros and q zeros uniformly with replacement. Zero candidates
/// that land on a nonzero are rejected and redrawn; rejections consume random
/// numbers but not the draw counter.
SampleSet draw_samples(const SparseTensor& x, std::size_t p, std::size_t q,
                       Rng& rng, std::size_t max_rejects = 0);

inline SampleSet draw_samples(const SparseTensor& x, const SampleCounts& c,
                              Rng& rng, std::size_t max_rejects = 0) {
  return draw_samples(x, c.resolved_nonzeros(x.nnz()), c.zeros, rng,
                      max_rejects);
}

/// One frozen past step: its id and the temporal weights solved at that time.
struct HistoryEntry {
  Index step = 0;
  Vector weights;
};

/// Frobenius history term (w/2) sum_h theta^{t-h} ||M_old_h - M_h||_F^2, where
/// M_old_h = [[s_h; A_old]] and M_h = [[s_h; A]].
struct HistoryTerms {
  const FactorList* old_factors = nullptr;
  std::span<const HistoryEntry> window;
  double weight = 0.0;  // w
  double decay = 1.0;   // theta
  Index t = 0;

  bool active() const {
    return old_factors != nullptr && !window.empty() && weight != 0.0;
  }
  double step_weight(Index h) const;
};

/// Exact history term value, evaluated through K-tensor inner products.
double history_objective(const FactorList& factors, const HistoryTerms& hist);

/// sum over draws of scale * f(x, m), the sampled data-fit part of F.
double sampled_loss_sum(const SparseTensor& x, const FactorList& factors,
                        const Vector& s, const LossFunction& loss,
                        const SampleSet& samples);

/// Sampled objective estimate: sampled data fit plus exact history and
/// regularization terms (lambda/2 sum ||A(k)||^2 + mu/2 ||s||^2).
double estimate_objective(const SparseTensor& x, const FactorList& factors,
                          const Vector& s, const LossFunction& loss,
                          const SampleSet& samples, const HistoryTerms& hist,
                          double lambda, double mu);

/// Sampled gradient tensor: per drawn coordinate, scale * df/dm accumulated
/// into one stored entry (order of first draw).
SparseTensor gradient_tensor(const SparseTensor& x, const FactorList& factors,
                             const Vector& s, const LossFunction& loss,
                             const SampleSet& samples);

SparseTensor sampled_gradient_tensor(const SparseTensor& x,
                                     const KTensor& model,
                                     const LossFunction& loss, std::size_t p,
                                     std::size_t q, Rng& rng,
                                     std::size_t max_rejects = 0);

/// Exact gradient tensor Y over every cell of the box. Small tensors only.
SparseTensor full_gradient_tensor(const SparseTensor& x,
                                  const FactorList& factors, const Vector& s,
                                  const LossFunction& loss);

}  // namespace ogcp
