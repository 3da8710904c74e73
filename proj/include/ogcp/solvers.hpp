#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string_view>
#include <vector>

#include "ogcp/adam.hpp"
#include "ogcp/ktensor.hpp"
#include "ogcp/loss.hpp"
#include "ogcp/sampling.hpp"
#include "ogcp/sparse_tensor.hpp"

namespace ogcp {

enum class TemporalMode { Sgd, LeastSquares };
enum class GradientMode { Sampled, DenseGaussian };

TemporalMode parse_temporal_mode(std::string_view name);
GradientMode parse_gradient_mode(std::string_view name);
const char* to_string(TemporalMode mode);
const char* to_string(GradientMode mode);

/// Epoch loop settings for one GCP-SGD subsolver.
struct EpochConfig {
  double tol = -std::numeric_limits<double>::infinity();  // stop once estimate <= tol
  int max_epochs = 1;           // kappa
  int iters_per_epoch = 100;    // tau
  AdamParams adam;
  SampleCounts objective{100000, 100000};  // p', q'
  SampleCounts gradient{1000, 1000};       // p, q
};

struct SolverConfig {
  EpochConfig weights;
  EpochConfig factors;
  double lambda = 0.0;          // factor regularization
  double mu = 0.0;              // temporal-weight regularization
  double history_weight = 0.0;  // w
  double history_decay = 1.0;   // theta
  double lower_bound = -std::numeric_limits<double>::infinity();
  TemporalMode temporal_mode = TemporalMode::Sgd;
  GradientMode gradient_mode = GradientMode::Sampled;
  /// Start the weight solve from the caller's s instead of zero.
  bool warm_start_weights = false;
  std::uint64_t seed = 1;
  std::size_t max_rejects = 0;

  void validate() const;
};

/// Record of one solver invocation's epoch loop.
struct EpochTrace {
  int epochs = 0;
  int rejected = 0;
  /// Estimate before the first epoch followed by the estimate after every
  /// accepted epoch.
  std::vector<double> accepted_objectives;
};

using FactorGradientObserver =
    std::function<void(std::int64_t iteration, const FactorList& gradient)>;

/// Factor-solver state that persists across slices.
struct FactorSolverState {
  AdamStepper<FactorList> adam;
  std::int64_t iteration = 0;
};

/// Temporal weights for one slice with the factors held fixed. Runs the
/// objective-gated ADAM epoch loop with an objective sample set drawn once and
/// a fresh gradient sample set per iteration. Dispatches to the least-squares
/// solve when `temporal_mode` asks for it.
Vector solve_weights(const SparseTensor& x, const FactorList& factors,
                     const LossFunction& loss, const SolverConfig& cfg,
                     Index t, EpochTrace* trace = nullptr,
                     const Vector* initial = nullptr);

/// Solves (Hadamard_k A(k)^T A(k) + mu I) s = b with b_j = sum_n x_n prod_k
/// A(k)[i_k, j]; the gaussian temporal subproblem in closed form.
Vector solve_weights_least_squares(const SparseTensor& x,
                                   const FactorList& factors, double mu);

/// Full factor gradient from a gradient tensor Y:
///   G_k = Y_(k) Z_k diag(s) + lambda A(k)
///       + sum_h w theta^{t-h} (A(k) diag(s_h) Z_k^T Z_k diag(s_h)
///                              - A_old(k) diag(s_h) Z_old,k^T Z_k diag(s_h)).
FactorList assemble_factor_gradient(const SparseTensor& y,
                                    const FactorList& factors, const Vector& s,
                                    const HistoryTerms& hist, double lambda);

/// Same assembly with the exact gaussian data term in place of the MTTKRP of Y.
FactorList dense_gaussian_factor_gradient(const SparseTensor& x,
                                          const FactorList& factors,
                                          const Vector& s,
                                          const HistoryTerms& hist,
                                          double lambda);

/// Adds lambda A(k) and the history contribution to each G_k in place.
void add_regularization_and_history(FactorList& grad, const FactorList& factors,
                                    const HistoryTerms& hist, double lambda);

/// Factor update for one slice with s_t fixed. Uses (and advances) the
/// persistent ADAM state and iteration counter.
void solve_factors(const SparseTensor& x, FactorList& factors, const Vector& s,
                   const FactorList& old_factors,
                   std::span<const HistoryEntry> window,
                   const LossFunction& loss, const SolverConfig& cfg, Index t,
                   FactorSolverState& state, EpochTrace* trace = nullptr,
                   const FactorGradientObserver* observer = nullptr);

struct StaticConfig {
  EpochConfig sgd{.tol = -std::numeric_limits<double>::infinity(),
                  .max_epochs = 50,
                  .iters_per_epoch = 100,
                  .adam = {},
                  .objective = {100000, 100000},
                  .gradient = {1000, 1000}};
  double lambda = 0.0;
  double lower_bound = -std::numeric_limits<double>::infinity();
  std::uint64_t seed = 1;
  std::size_t max_rejects = 0;
  /// Independent starts; the one with the lowest final objective estimate wins.
  int restarts = 1;

  void validate() const;
};

/// Static GCP-SGD fit of every mode of x. The first start is `init` when
/// given; the others are uniform(0,1) factors rescaled so ||M||_F matches
/// ||X||_F. With several restarts the run with the lowest final objective
/// estimate is returned, and `trace` describes that run.
/// The result is normalized: unit columns with norms folded into the weights.
KTensor solve_static(const SparseTensor& x, Index rank,
                     const LossFunction& loss, const StaticConfig& cfg,
                     const KTensor* init = nullptr,
                     EpochTrace* trace = nullptr);

}  // namespace ogcp
