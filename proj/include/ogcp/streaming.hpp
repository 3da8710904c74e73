#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "ogcp/ktensor.hpp"
#include "ogcp/loss.hpp"
#include "ogcp/rng.hpp"
#include "ogcp/sampling.hpp"
#include "ogcp/solvers.hpp"
#include "ogcp/sparse_tensor.hpp"

namespace ogcp {

/// Bounded reservoir of past steps and their frozen temporal weights.
class HistoryWindow {
 public:
  explicit HistoryWindow(std::size_t capacity = 0) : capacity_(capacity) {}

  /// Adds step t (the step just processed). Below capacity the step is
  /// appended; otherwise j is drawn uniformly from {1..t} and, when j <= H,
  /// the j-th stored entry is replaced.
  void update(Index t, const Vector& weights, Rng& rng);

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  std::span<const HistoryEntry> entries() const { return entries_; }
  std::vector<Index> steps() const;

  /// Replaces the contents wholesale (checkpoint restore).
  void assign(std::vector<HistoryEntry> entries);

 private:
  std::size_t capacity_;
  std::vector<HistoryEntry> entries_;
};

struct StreamConfig {
  SolverConfig solver;
  std::size_t window_capacity = 50;  // H
  /// Sample counts of the per-slice sampled local loss.
  SampleCounts metrics_samples{100000, 100000};
  /// Exact local loss is computed only for slices with at most this many cells.
  Index exact_loss_cell_cap = 10'000'000;
};

/// Per-slice diagnostics.
struct SliceReport {
  Index t = 0;
  Vector weights;
  double local_loss_sampled = 0.0;
  std::optional<double> local_loss_exact;
  bool normalized = true;  // false when the slice is empty
  EpochTrace weights_trace;
  EpochTrace factors_trace;
  double wall_ms = 0.0;
};

/// Everything needed to continue a stream. Its size does not grow with the
/// number of slices processed.
struct StreamState {
  FactorList factors;
  FactorList old_factors;
  HistoryWindow window;
  FactorSolverState solver;
  Vector last_weights;  // s_t of the last processed step; empty before any
  Index t = 0;  // last processed step (1-based); 0 before the first slice
};

/// Driver for streaming GCP: temporal solve, factor update, window update and
/// old-factor snapshot per slice.
class OnlineGcp {
 public:
  OnlineGcp(StreamConfig cfg, LossFunction loss, StreamState state);

  /// Starts a stream at step 0 with the given factors and an empty window.
  static OnlineGcp from_factors(StreamConfig cfg, LossFunction loss,
                                FactorList factors);

  SliceReport process_slice(const SparseTensor& x_t);

  const StreamState& state() const { return state_; }
  const StreamConfig& config() const { return cfg_; }
  const LossFunction& loss() const { return loss_; }
  Index rank() const { return state_.factors.front().cols(); }

  /// Versioned text checkpoint of the full stream state.
  void save_checkpoint(std::ostream& out) const;
  static StreamState load_checkpoint(std::istream& in);

 private:
  StreamConfig cfg_;
  LossFunction loss_;
  StreamState state_;
};

struct WarmStart {
  KTensor static_model;              // normalized (d+1)-way static fit
  FactorList factors;                // the d non-temporal factors
  std::vector<Vector> temporal;      // s_1..s_{H_init}, weights absorbed
  HistoryWindow window;
};

/// Static fit of the first slices (stacked along the last mode); seeds the
/// stream's factors, temporal weights and history window. The window receives
/// the warm-start steps through the same reservoir rule used while streaming.
WarmStart warm_start(const SparseTensor& block, Index rank,
                     const LossFunction& loss, const StaticConfig& cfg,
                     std::size_t window_capacity);

/// Streaming state that continues from a warm start at step H_init.
StreamState state_from_warm_start(const WarmStart& ws);

}  // namespace ogcp
