#include "ogcp/solvers.hpp"

#include <cmath>
#include <sstream>

#include <Eigen/QR>

#include "ogcp/kernels.hpp"
#include "ogcp/rng.hpp"

namespace ogcp {

namespace {

// p = 0 when there are no nonzeros to draw, q = 0 when there are no zeros.
SampleCounts feasible_counts(const SparseTensor& x, SampleCounts c) {
  c.nonzeros = x.nnz() == 0 ? 0 : c.resolved_nonzeros(x.nnz());
  if (static_cast<Index>(x.nnz()) == x.numel()) c.zeros = 0;
  return c;
}

void check_objective(double f, Index t, const char* phase) {
  if (!std::isfinite(f)) {
    std::ostringstream msg;
    msg << phase << " objective became non-finite at slice " << t;
    fail(ErrorKind::Divergence, msg.str());
  }
}

void check_epoch_config(const EpochConfig& e, const char* name) {
  if (e.max_epochs < 1 || e.iters_per_epoch < 1)
    fail(ErrorKind::Domain,
         std::string(name) + ": epochs and iterations per epoch must be >= 1");
  if (std::isnan(e.tol) || e.tol == std::numeric_limits<double>::infinity())
    fail(ErrorKind::Domain, std::string(name) + ": tolerance must be finite or -inf");
}

AdamParams with_bound(AdamParams p, double lower_bound) {
  p.lower_bound = lower_bound;
  return p;
}

// Z^T y over every cell for the gaussian loss: 2 ((Hadamard_k G_k) s - b).
Vector dense_gaussian_weights_gradient(const SparseTensor& x,
                                       const FactorList& factors,
                                       const Vector& s) {
  const GramMatrix g = hadamard_gram(factors, factors, factors.size());
  return 2.0 * (g * s - weights_mttkrp(x, factors));
}

}  // namespace

TemporalMode parse_temporal_mode(std::string_view name) {
  if (name == "sgd") return TemporalMode::Sgd;
  if (name == "ls" || name == "least-squares") return TemporalMode::LeastSquares;
  fail(ErrorKind::Domain, "unknown temporal solver '" + std::string(name) + "'");
}

GradientMode parse_gradient_mode(std::string_view name) {
  if (name == "sampled") return GradientMode::Sampled;
  if (name == "dense-gaussian") return GradientMode::DenseGaussian;
  fail(ErrorKind::Domain, "unknown gradient mode '" + std::string(name) + "'");
}

const char* to_string(TemporalMode mode) {
  return mode == TemporalMode::Sgd ? "sgd" : "ls";
}

const char* to_string(GradientMode mode) {
  return mode == GradientMode::Sampled ? "sampled" : "dense-gaussian";
}

void SolverConfig::validate() const {
  check_epoch_config(weights, "weights solver");
  check_epoch_config(factors, "factor solver");
  if (lambda < 0 || mu < 0 || history_weight < 0)
    fail(ErrorKind::Domain, "lambda, mu and the history weight must be >= 0");
  if (!(history_decay > 0 && history_decay <= 1))
    fail(ErrorKind::Domain, "history decay theta must lie in (0,1]");
}

void StaticConfig::validate() const {
  check_epoch_config(sgd, "static solver");
  if (lambda < 0) fail(ErrorKind::Domain, "lambda must be >= 0");
  if (restarts < 1) fail(ErrorKind::Domain, "static restarts must be >= 1");
}

Vector solve_weights_least_squares(const SparseTensor& x,
                                   const FactorList& factors, double mu) {
  const Index rank = factors.front().cols();
  GramMatrix lhs = hadamard_gram(factors, factors, factors.size());
  lhs.diagonal().array() += mu;
  const Vector rhs = weights_mttkrp(x, factors);
  Eigen::ColPivHouseholderQR<GramMatrix> qr(lhs);
  if (qr.rank() < rank)
    fail(ErrorKind::LinearSolve,
         "temporal least-squares system is singular (rank " +
             std::to_string(qr.rank()) + " < " + std::to_string(rank) +
             "); use a positive --reg-weights mu");
  return qr.solve(rhs);
}

Vector solve_weights(const SparseTensor& x, const FactorList& factors,
                     const LossFunction& loss, const SolverConfig& cfg,
                     Index t, EpochTrace* trace, const Vector* initial) {
  detail::check_tensor_factors(x, factors);
  const Index rank = factors.front().cols();
  if (cfg.temporal_mode == TemporalMode::LeastSquares) {
    if (loss.kind() != LossKind::Gaussian)
      fail(ErrorKind::Contract,
           "least-squares temporal solve requires the gaussian loss");
    return solve_weights_least_squares(x, factors, cfg.mu);
  }

  const EpochConfig& ec = cfg.weights;
  Vector s = Vector::Zero(rank);
  if (initial && cfg.warm_start_weights) {
    if (initial->size() != rank)
      fail(ErrorKind::Shape, "initial weights do not match rank");
    s = initial->cwiseMax(cfg.lower_bound);
  }

  AdamStepper<Vector> adam(with_bound(ec.adam, cfg.lower_bound));
  adam.init(s);
  adam.update(s, true);

  Rng obj_rng = keyed_rng(cfg.seed, static_cast<std::uint64_t>(t),
                          RngPhase::WeightsObjective);
  const SampleSet obj =
      draw_samples(x, feasible_counts(x, ec.objective), obj_rng, cfg.max_rejects);
  const SampleCounts grad_counts = feasible_counts(x, ec.gradient);
  const HistoryTerms no_history{};

  double fest = estimate_objective(x, factors, s, loss, obj, no_history, 0.0, cfg.mu);
  check_objective(fest, t, "weights");
  if (trace) {
    *trace = {};
    trace->accepted_objectives.push_back(fest);
  }

  std::int64_t iter = 0;
  for (int epoch = 0; fest > ec.tol && epoch < ec.max_epochs; ++epoch) {
    const double fest_old = fest;
    for (int it = 0; it < ec.iters_per_epoch; ++it) {
      Vector g;
      if (cfg.gradient_mode == GradientMode::DenseGaussian) {
        g = dense_gaussian_weights_gradient(x, factors, s);
      } else {
        Rng rng = keyed_rng(cfg.seed, static_cast<std::uint64_t>(t),
                            RngPhase::WeightsGradient,
                            static_cast<std::uint64_t>(epoch),
                            static_cast<std::uint64_t>(it));
        const SampleSet gs = draw_samples(x, grad_counts, rng, cfg.max_rejects);
        g = weights_mttkrp(gradient_tensor(x, factors, s, loss, gs), factors);
      }
      g += cfg.mu * s;
      adam.step(s, g, iter + 1);
      ++iter;
    }
    fest = estimate_objective(x, factors, s, loss, obj, no_history, 0.0, cfg.mu);
    check_objective(fest, t, "weights");
    const bool passed = !(fest > fest_old);
    adam.update(s, passed);
    if (!passed) {
      fest = fest_old;
      iter -= ec.iters_per_epoch;
    }
    if (trace) {
      ++trace->epochs;
      if (passed)
        trace->accepted_objectives.push_back(fest);
      else
        ++trace->rejected;
    }
  }
  return s;
}

void add_regularization_and_history(FactorList& grad, const FactorList& factors,
                                    const HistoryTerms& hist, double lambda) {
  const std::size_t d = factors.size();
  if (lambda != 0.0)
    for (std::size_t k = 0; k < d; ++k) grad[k] += lambda * factors[k];
  if (!hist.active()) return;

  const FactorList& old = *hist.old_factors;
  const Index rank = factors.front().cols();
  // sum_h c_h diag(s_h) Gamma diag(s_h) = Gamma .* (sum_h c_h s_h s_h^T)
  GramMatrix weighted = GramMatrix::Zero(rank, rank);
  for (const auto& h : hist.window) {
    if (h.weights.size() != rank)
      fail(ErrorKind::Shape, "history weights do not match rank");
    weighted.noalias() += hist.step_weight(h.step) * h.weights * h.weights.transpose();
  }
  GramCache cache;
  cache.refresh(factors, &old);
  for (std::size_t k = 0; k < d; ++k) {
    const GramMatrix b = cache.gram_product(k).cwiseProduct(weighted);
    const GramMatrix c = cache.cross_gram_product(k).cwiseProduct(weighted);
    grad[k].noalias() += factors[k] * b;
    grad[k].noalias() -= old[k] * c;
  }
}

FactorList assemble_factor_gradient(const SparseTensor& y,
                                    const FactorList& factors, const Vector& s,
                                    const HistoryTerms& hist, double lambda) {
  detail::check_tensor_factors(y, factors);
  FactorList grad(factors.size());
  for (std::size_t k = 0; k < factors.size(); ++k)
    grad[k] = sampled_mttkrp(y, factors, k) * s.asDiagonal();
  add_regularization_and_history(grad, factors, hist, lambda);
  return grad;
}

FactorList dense_gaussian_factor_gradient(const SparseTensor& x,
                                          const FactorList& factors,
                                          const Vector& s,
                                          const HistoryTerms& hist,
                                          double lambda) {
  FactorList grad(factors.size());
  for (std::size_t k = 0; k < factors.size(); ++k)
    grad[k] = dense_gaussian_mttkrp_gradient(x, factors, s, k);
  add_regularization_and_history(grad, factors, hist, lambda);
  return grad;
}

void solve_factors(const SparseTensor& x, FactorList& factors, const Vector& s,
                   const FactorList& old_factors,
                   std::span<const HistoryEntry> window,
                   const LossFunction& loss, const SolverConfig& cfg, Index t,
                   FactorSolverState& state, EpochTrace* trace,
                   const FactorGradientObserver* observer) {
  detail::check_tensor_factors(x, factors);
  detail::check_same_shape(factors, old_factors);
  if (cfg.gradient_mode == GradientMode::DenseGaussian &&
      loss.kind() != LossKind::Gaussian)
    fail(ErrorKind::Contract, "dense gradient mode requires the gaussian loss");

  const EpochConfig& ec = cfg.factors;
  if (!state.adam.initialized()) {
    state.adam = AdamStepper<FactorList>(with_bound(ec.adam, cfg.lower_bound));
    state.adam.init(factors);
  }
  state.adam.update(factors, true);

  const HistoryTerms hist{&old_factors, window, cfg.history_weight,
                          cfg.history_decay, t};
  Rng obj_rng = keyed_rng(cfg.seed, static_cast<std::uint64_t>(t),
                          RngPhase::FactorsObjective);
  const SampleSet obj =
      draw_samples(x, feasible_counts(x, ec.objective), obj_rng, cfg.max_rejects);
  const SampleCounts grad_counts = feasible_counts(x, ec.gradient);

  double fest = estimate_objective(x, factors, s, loss, obj, hist, cfg.lambda, 0.0);
  check_objective(fest, t, "factor");
  if (trace) {
    *trace = {};
    trace->accepted_objectives.push_back(fest);
  }

  for (int epoch = 0; fest > ec.tol && epoch < ec.max_epochs; ++epoch) {
    const double fest_old = fest;
    for (int it = 0; it < ec.iters_per_epoch; ++it) {
      FactorList grad;
      if (cfg.gradient_mode == GradientMode::DenseGaussian) {
        grad = dense_gaussian_factor_gradient(x, factors, s, hist, cfg.lambda);
      } else {
        Rng rng = keyed_rng(cfg.seed, static_cast<std::uint64_t>(t),
                            RngPhase::FactorsGradient,
                            static_cast<std::uint64_t>(epoch),
                            static_cast<std::uint64_t>(it));
        const SampleSet gs = draw_samples(x, grad_counts, rng, cfg.max_rejects);
        grad = assemble_factor_gradient(gradient_tensor(x, factors, s, loss, gs),
                                        factors, s, hist, cfg.lambda);
      }
      if (observer) (*observer)(state.iteration, grad);
      state.adam.step(factors, grad, state.iteration + 1);
      ++state.iteration;
    }
    fest = estimate_objective(x, factors, s, loss, obj, hist, cfg.lambda, 0.0);
    check_objective(fest, t, "factor");
    const bool passed = !(fest > fest_old);
    state.adam.update(factors, passed);
    if (!passed) {
      fest = fest_old;
      state.iteration -= ec.iters_per_epoch;
    }
    if (trace) {
      ++trace->epochs;
      if (passed)
        trace->accepted_objectives.push_back(fest);
      else
        ++trace->rejected;
    }
  }
}

namespace {

FactorList random_static_init(const SparseTensor& x, Index rank,
                              const StaticConfig& cfg, std::uint64_t restart) {
  Rng rng = keyed_rng(cfg.seed, restart, RngPhase::StaticInit);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  FactorList factors;
  for (std::size_t k = 0; k < x.ndims(); ++k) {
    FactorMatrix a(x.dim(k), rank);
    for (Index i = 0; i < a.rows(); ++i)
      for (Index j = 0; j < a.cols(); ++j) a(i, j) = unif(rng);
    factors.push_back(std::move(a));
  }
  const KTensor m(Vector::Ones(rank), factors);
  const double model_norm = std::sqrt(ktensor_inner(m, m));
  const double data_norm = std::sqrt(x.frobenius_norm_squared());
  if (model_norm > 0 && data_norm > 0) {
    const double c = std::pow(data_norm / model_norm,
                              1.0 / static_cast<double>(x.ndims()));
    for (auto& a : factors) a *= c;
  }
  return factors;
}

// One ADAM run from `factors`; returns the last accepted objective estimate.
double static_run(const SparseTensor& x, FactorList& factors,
                  const LossFunction& loss, const StaticConfig& cfg,
                  const SampleSet& obj, std::uint64_t restart, EpochTrace* trace) {
  for (auto& a : factors) a = a.cwiseMax(cfg.lower_bound);
  const Vector ones = Vector::Ones(factors.front().cols());
  const EpochConfig& ec = cfg.sgd;
  AdamStepper<FactorList> adam(with_bound(ec.adam, cfg.lower_bound));
  adam.init(factors);
  adam.update(factors, true);
  const SampleCounts grad_counts = feasible_counts(x, ec.gradient);
  const HistoryTerms no_history{};

  double fest = estimate_objective(x, factors, ones, loss, obj, no_history, cfg.lambda, 0.0);
  check_objective(fest, 0, "static");
  if (trace) {
    *trace = {};
    trace->accepted_objectives.push_back(fest);
  }

  std::int64_t iter = 0;
  for (int epoch = 0; fest > ec.tol && epoch < ec.max_epochs; ++epoch) {
    const double fest_old = fest;
    for (int it = 0; it < ec.iters_per_epoch; ++it) {
      Rng rng = keyed_rng(cfg.seed, restart, RngPhase::StaticGradient,
                          static_cast<std::uint64_t>(epoch),
                          static_cast<std::uint64_t>(it));
      const SampleSet gs = draw_samples(x, grad_counts, rng, cfg.max_rejects);
      const FactorList grad = assemble_factor_gradient(
          gradient_tensor(x, factors, ones, loss, gs), factors, ones,
          no_history, cfg.lambda);
      adam.step(factors, grad, iter + 1);
      ++iter;
    }
    fest = estimate_objective(x, factors, ones, loss, obj, no_history, cfg.lambda, 0.0);
    check_objective(fest, 0, "static");
    const bool passed = !(fest > fest_old);
    adam.update(factors, passed);
    if (!passed) {
      fest = fest_old;
      iter -= ec.iters_per_epoch;
    }
    if (trace) {
      ++trace->epochs;
      if (passed)
        trace->accepted_objectives.push_back(fest);
      else
        ++trace->rejected;
    }
  }
  return fest;
}

}  // namespace

KTensor solve_static(const SparseTensor& x, Index rank,
                     const LossFunction& loss, const StaticConfig& cfg,
                     const KTensor* init, EpochTrace* trace) {
  cfg.validate();
  if (rank < 1) fail(ErrorKind::Domain, "rank must be >= 1");
  if (init && (init->rank() != rank || init->dims() != x.dims()))
    fail(ErrorKind::Shape, "initial K-tensor does not match data and rank");

  // Every restart is scored on the same objective sample set.
  Rng obj_rng = keyed_rng(cfg.seed, 0, RngPhase::StaticObjective);
  const SampleSet obj =
      draw_samples(x, feasible_counts(x, cfg.sgd.objective), obj_rng, cfg.max_rejects);

  FactorList best;
  double best_f = std::numeric_limits<double>::infinity();
  for (int r = 0; r < cfg.restarts; ++r) {
    // Weights stay at one during the fit; initial weights fold into mode 0.
    FactorList factors;
    if (init && r == 0) {
      factors = init->factors();
      factors[0] = factors[0] * init->weights().asDiagonal();
    } else {
      factors = random_static_init(x, rank, cfg, static_cast<std::uint64_t>(r));
    }
    EpochTrace run_trace;
    const double f = static_run(x, factors, loss, cfg, obj, static_cast<std::uint64_t>(r),
                                trace ? &run_trace : nullptr);
    if (r == 0 || f < best_f) {
      best_f = f;
      best = std::move(factors);
      if (trace) *trace = std::move(run_trace);
    }
  }

  KTensor model(Vector::Ones(rank), std::move(best));
  model.normalize();
  return model;
}

}  // namespace ogcp
