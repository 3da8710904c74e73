#include "ogcp/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <unordered_map>

#include "ogcp/rng.hpp"

namespace ogcp {

void SyntheticSpec::validate() const {
  if (dims.empty()) fail(ErrorKind::Domain, "synthetic dims must be non-empty");
  for (Index n : dims)
    if (n <= 0) fail(ErrorKind::Domain, "synthetic dims must be positive");
  if (rank <= 0) fail(ErrorKind::Domain, "synthetic rank must be positive");
  if (!(noise >= 0)) fail(ErrorKind::Domain, "noise must be >= 0");
  if (!(fraction > 0 && fraction <= 1))
    fail(ErrorKind::Domain, "target nonzero fraction must lie in (0,1]");
}

SyntheticData gen_gaussian(const SyntheticSpec& spec) {
  spec.validate();
  double cells = 1;
  for (Index n : spec.dims) cells *= static_cast<double>(n);
  if (cells > static_cast<double>(spec.cell_cap))
    fail(ErrorKind::Generation, "dense gaussian tensor of " +
                                    std::to_string(cells) +
                                    " cells exceeds the cap of " +
                                    std::to_string(spec.cell_cap));

  Rng rng = keyed_rng(spec.seed, 0, RngPhase::Generator);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  FactorList factors;
  for (Index n : spec.dims) {
    FactorMatrix a(n, spec.rank);
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < spec.rank; ++j) a(i, j) = unif(rng);
    factors.push_back(std::move(a));
  }
  KTensor truth(Vector::Ones(spec.rank), std::move(factors));

  std::normal_distribution<double> noise(0.0, 1.0);
  const auto n_cells = static_cast<std::size_t>(cells);
  std::vector<Index> coords;
  std::vector<double> values;
  coords.reserve(n_cells * spec.dims.size());
  values.reserve(n_cells);
  for_each_index(spec.dims, [&](std::span<const Index> idx) {
    const double m = model_entry_unchecked(truth.weights(), truth.factors(), idx);
    double x = m + spec.noise * noise(rng);
    if (x == 0.0) x = std::signbit(m) ? -1e-300 : 1e-300;
    coords.insert(coords.end(), idx.begin(), idx.end());
    values.push_back(x);
  });
  return {SparseTensor(spec.dims, std::move(coords), std::move(values)),
          std::move(truth), 0};
}

namespace {

// Expected fraction of cells hit by n multinomial events with cell
// probabilities `probs`.
double expected_fraction(const std::vector<double>& probs, double n) {
  double acc = 0.0;
  for (double p : probs) acc += -std::expm1(n * std::log1p(-std::min(p, 1.0)));
  return acc / static_cast<double>(probs.size());
}

}  // namespace

SyntheticData gen_poisson(const SyntheticSpec& spec) {
  spec.validate();
  const std::size_t d = spec.dims.size();
  const Index rank = spec.rank;
  Rng rng = keyed_rng(spec.seed, 0, RngPhase::Generator);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  FactorList factors;
  for (Index n : spec.dims) {
    FactorMatrix a(n, rank);
    const Index boosted = std::max<Index>(1, n / 10);
    for (Index j = 0; j < rank; ++j) {
      for (Index i = 0; i < n; ++i) a(i, j) = unif(rng);
      std::vector<Index> rows(n);
      for (Index i = 0; i < n; ++i) rows[i] = i;
      std::shuffle(rows.begin(), rows.end(), rng);
      for (Index b = 0; b < boosted; ++b) a(rows[b], j) *= 10.0;
      a.col(j) /= a.col(j).sum();
    }
    factors.push_back(std::move(a));
  }
  Vector lambda(rank);
  for (Index j = 0; j < rank; ++j) lambda(j) = 0.5 + 0.5 * unif(rng);
  lambda /= lambda.sum();

  double cells = 1;
  for (Index n : spec.dims) cells *= static_cast<double>(n);

  // Cell probabilities: every cell for small boxes, a fixed random subset
  // otherwise.
  constexpr std::size_t kProbeCells = 200'000;
  std::vector<double> probs;
  if (cells <= 2e6) {
    probs.reserve(static_cast<std::size_t>(cells));
    for_each_index(spec.dims, [&](std::span<const Index> idx) {
      probs.push_back(model_entry_unchecked(lambda, factors, idx));
    });
  } else {
    std::vector<std::uniform_int_distribution<Index>> pick;
    for (Index n : spec.dims) pick.emplace_back(0, n - 1);
    std::vector<Index> idx(d);
    probs.reserve(kProbeCells);
    for (std::size_t c = 0; c < kProbeCells; ++c) {
      for (std::size_t k = 0; k < d; ++k) idx[k] = pick[k](rng);
      probs.push_back(model_entry_unchecked(lambda, factors,
                                            std::span<const Index>(idx)));
    }
  }

  double events = 0.0;
  double achieved = 0.0;
  if (spec.fraction >= 1.0) {
    const double p_min = *std::min_element(probs.begin(), probs.end());
    if (!(p_min > 0))
      fail(ErrorKind::Generation, "target fraction 1.0 unreachable: a cell has zero probability");
    events = std::ceil((std::log(cells) + std::log(1000.0)) / p_min);
    achieved = expected_fraction(probs, events);
  } else {
    events = -cells * std::log1p(-spec.fraction);
    bool converged = false;
    for (int iter = 0; iter < 10; ++iter) {
      achieved = expected_fraction(probs, events);
      if (std::abs(achieved - spec.fraction) <= 0.01 * spec.fraction) {
        converged = true;
        break;
      }
      events *= std::log1p(-spec.fraction) / std::log1p(-achieved);
    }
    if (!converged) {
      std::ostringstream msg;
      msg << "could not calibrate event count to nonzero fraction "
          << spec.fraction << " in 10 iterations (achieved " << achieved << ")";
      fail(ErrorKind::Generation, msg.str());
    }
  }
  events = std::max(1.0, std::round(events));
  if (events > 2e9)
    fail(ErrorKind::Generation, "calibrated event count is too large to draw");

  std::discrete_distribution<Index> comp(lambda.data(), lambda.data() + rank);
  std::vector<std::vector<std::discrete_distribution<Index>>> mode_dist(d);
  for (std::size_t k = 0; k < d; ++k)
    for (Index j = 0; j < rank; ++j) {
      const auto col = factors[k].col(j);
      std::vector<double> w(col.size());
      for (Index i = 0; i < col.size(); ++i) w[i] = col(i);
      mode_dist[k].emplace_back(w.begin(), w.end());
    }

  std::unordered_map<Index, double> counts;
  std::vector<Index> strides(d, 1);
  for (std::size_t k = 1; k < d; ++k) strides[k] = strides[k - 1] * spec.dims[k - 1];
  const auto n_events = static_cast<std::uint64_t>(events);
  for (std::uint64_t e = 0; e < n_events; ++e) {
    const Index j = comp(rng);
    Index lin = 0;
    for (std::size_t k = 0; k < d; ++k) lin += mode_dist[k][j](rng) * strides[k];
    counts[lin] += 1.0;
  }

  std::vector<std::pair<Index, double>> sorted(counts.begin(), counts.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<Index> coords;
  std::vector<double> values;
  coords.reserve(sorted.size() * d);
  values.reserve(sorted.size());
  for (const auto& [lin, c] : sorted) {
    Index rem = lin;
    for (std::size_t k = 0; k < d; ++k) {
      coords.push_back(rem % spec.dims[k]);
      rem /= spec.dims[k];
    }
    values.push_back(c);
  }
  SparseTensor x(spec.dims, std::move(coords), std::move(values));

  if (spec.fraction >= 1.0 && static_cast<Index>(x.nnz()) != x.numel()) {
    std::ostringstream msg;
    msg << "target fraction 1.0 not reached (achieved "
        << static_cast<double>(x.nnz()) / cells << ")";
    fail(ErrorKind::Generation, msg.str());
  }

  KTensor truth(lambda * events, std::move(factors));
  return {std::move(x), std::move(truth), n_events};
}

}  // namespace ogcp
