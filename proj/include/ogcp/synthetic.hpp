#pragma once

#include <cstdint>
#include <vector>

#include "ogcp/ktensor.hpp"
#include "ogcp/sparse_tensor.hpp"

namespace ogcp {

enum class SyntheticKind { Gaussian, Poisson };

struct SyntheticSpec {
  SyntheticKind kind = SyntheticKind::Gaussian;
  std::vector<Index> dims;
  Index rank = 1;
  double noise = 0.2;        // gaussian standard deviation
  double fraction = 0.032;   // poisson target nonzero fraction
  std::uint64_t seed = 1;
  Index cell_cap = 100'000'000;  // gaussian refuses larger boxes

  void validate() const;
};

struct SyntheticData {
  SparseTensor tensor;
  KTensor truth;
  /// Poisson only: total number of events drawn.
  std::uint64_t events = 0;
};

/// Dense gaussian data: uniform(0,1) factors, unit weights, every cell of the
/// model plus N(0, noise^2). A cell that lands exactly on 0 is nudged to
/// +/-1e-300 so it can be stored.
SyntheticData gen_gaussian(const SyntheticSpec& spec);

/// Sparse count data. Each factor column is uniform(0,1) with roughly 10% of
/// its entries boosted tenfold, then normalized to sum to one; weights are
/// normalized too, so the model is a distribution over cells. The total event
/// count is calibrated so the expected fraction of hit cells matches the
/// target, and events are allocated by drawing a component and then one index
/// per mode. The returned truth is the expected-count K-tensor.
SyntheticData gen_poisson(const SyntheticSpec& spec);

inline SyntheticData generate(const SyntheticSpec& spec) {
  return spec.kind == SyntheticKind::Gaussian ? gen_gaussian(spec)
                                              : gen_poisson(spec);
}

}  // namespace ogcp
