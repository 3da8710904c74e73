#include "ogcp/sampling.hpp"

#include <cmath>
#include <sstream>

#include "ogcp/kernels.hpp"

namespace ogcp {

SampleSet draw_samples(const SparseTensor& x, std::size_t p, std::size_t q,
                       Rng& rng, std::size_t max_rejects) {
  const std::size_t d = x.ndims();
  const std::size_t eta = x.nnz();
  const double zeros = x.numel_float() - static_cast<double>(eta);

  if (p > 0 && eta == 0)
    fail(ErrorKind::Precondition,
         "cannot draw nonzero samples from a tensor with no nonzeros");
  if (q > 0 && static_cast<Index>(eta) == x.numel())
    fail(ErrorKind::Precondition,
         "cannot draw zero samples from a fully dense tensor; set q = 0");

  SampleSet s;
  s.order = d;
  s.nz_scale = p > 0 ? static_cast<double>(eta) / static_cast<double>(p) : 0.0;
  s.zero_scale = q > 0 ? zeros / static_cast<double>(q) : 0.0;

  s.nz_ordinals.reserve(p);
  s.nz_values.reserve(p);
  if (p > 0) {
    std::uniform_int_distribution<std::size_t> pick(0, eta - 1);
    for (std::size_t c = 0; c < p; ++c) {
      const std::size_t n = pick(rng);
      s.nz_ordinals.push_back(n);
      s.nz_values.push_back(x.value(n));
    }
  }

  if (q > 0) {
    const std::size_t budget = max_rejects > 0 ? max_rejects : 1000 * q;
    std::vector<std::uniform_int_distribution<Index>> mode_pick;
    for (std::size_t k = 0; k < d; ++k) mode_pick.emplace_back(0, x.dim(k) - 1);
    s.zero_coords.resize(q * d);
    std::vector<Index> cand(d);
    std::size_t c = 0;
    while (c < q) {
      for (std::size_t k = 0; k < d; ++k) cand[k] = mode_pick[k](rng);
      if (eta > 0 && x.find_linear(x.linearize_unchecked(cand))) {
        if (++s.rejections > budget) {
          std::ostringstream msg;
          msg << "zero sampling exhausted its rejection budget of " << budget
              << " (nonzero density " << static_cast<double>(eta) / x.numel_float()
              << ")";
          fail(ErrorKind::Sampling, msg.str());
        }
        continue;
      }
      std::copy(cand.begin(), cand.end(), s.zero_coords.begin() + c * d);
      ++c;
    }
  }
  return s;
}

double HistoryTerms::step_weight(Index h) const {
  return weight * std::pow(decay, static_cast<double>(t - h));
}

double history_objective(const FactorList& factors, const HistoryTerms& hist) {
  if (!hist.active()) return 0.0;
  const FactorList& old = *hist.old_factors;
  // ||M_old_h - M_h||^2 = s_h^T (G_oo - 2 G_oa + G_aa) s_h with full-mode
  // Hadamard Grams shared by every window entry.
  const std::size_t all = factors.size();
  const GramMatrix g_oo = hadamard_gram(old, old, all);
  const GramMatrix g_oa = hadamard_gram(factors, old, all);
  const GramMatrix g_aa = hadamard_gram(factors, factors, all);
  double total = 0.0;
  for (const auto& h : hist.window) {
    const Vector& sh = h.weights;
    const double diff = sh.dot(g_oo * sh) - 2.0 * sh.dot(g_oa * sh) +
                        sh.dot(g_aa * sh);
    total += hist.step_weight(h.step) * std::max(diff, 0.0);
  }
  return 0.5 * total;
}

double sampled_loss_sum(const SparseTensor& x, const FactorList& factors,
                        const Vector& s, const LossFunction& loss,
                        const SampleSet& samples) {
  double nz_sum = 0.0;
  for (std::size_t c = 0; c < samples.p(); ++c) {
    const std::size_t n = samples.nz_ordinals[c];
    const double m = model_entry_unchecked(s, factors, x.coord(n));
    nz_sum += loss.value(samples.nz_values[c], m);
  }
  double z_sum = 0.0;
  for (std::size_t c = 0; c < samples.q(); ++c) {
    const double m = model_entry_unchecked(s, factors, samples.zero_coord(c));
    z_sum += loss.value(0.0, m);
  }
  return samples.nz_scale * nz_sum + samples.zero_scale * z_sum;
}

double estimate_objective(const SparseTensor& x, const FactorList& factors,
                          const Vector& s, const LossFunction& loss,
                          const SampleSet& samples, const HistoryTerms& hist,
                          double lambda, double mu) {
  double f = sampled_loss_sum(x, factors, s, loss, samples);
  f += history_objective(factors, hist);
  if (lambda != 0.0) {
    double sq = 0.0;
    for (const auto& a : factors) sq += a.squaredNorm();
    f += 0.5 * lambda * sq;
  }
  if (mu != 0.0) f += 0.5 * mu * s.squaredNorm();
  return f;
}

namespace {

// Open-addressing map from a non-negative key to a slot number, sized for a
// known number of insertions. Much cheaper than a node-based map for the
// per-iteration merge of repeated draws.
class SlotTable {
 public:
  explicit SlotTable(std::size_t expected) {
    std::size_t cap = 16;
    while (cap < 2 * expected) cap <<= 1;
    keys_.assign(cap, -1);
    slots_.resize(cap);
    mask_ = cap - 1;
  }

  // Returns (slot, inserted); `next` becomes the slot of a new key.
  std::pair<std::size_t, bool> find_or_insert(Index key, std::size_t next) {
    std::size_t h = static_cast<std::size_t>(splitmix64(static_cast<std::uint64_t>(key))) & mask_;
    while (true) {
      if (keys_[h] == key) return {slots_[h], false};
      if (keys_[h] < 0) {
        keys_[h] = key;
        slots_[h] = next;
        return {next, true};
      }
      h = (h + 1) & mask_;
    }
  }

 private:
  std::vector<Index> keys_;
  std::vector<std::size_t> slots_;
  std::size_t mask_ = 0;
};

}  // namespace

SparseTensor gradient_tensor(const SparseTensor& x, const FactorList& factors,
                             const Vector& s, const LossFunction& loss,
                             const SampleSet& samples) {
  SlotTable slot(samples.p() + samples.q());
  std::vector<Index> coords;
  std::vector<double> values;
  coords.reserve((samples.p() + samples.q()) * x.ndims());
  values.reserve(samples.p() + samples.q());

  auto accumulate = [&](std::span<const Index> idx, double v) {
    const auto [at, fresh] = slot.find_or_insert(x.linearize_unchecked(idx), values.size());
    if (fresh) {
      coords.insert(coords.end(), idx.begin(), idx.end());
      values.push_back(v);
    } else {
      values[at] += v;
    }
  };

  for (std::size_t c = 0; c < samples.p(); ++c) {
    const auto idx = x.coord(samples.nz_ordinals[c]);
    const double m = model_entry_unchecked(s, factors, idx);
    accumulate(idx, samples.nz_scale * loss.deriv(samples.nz_values[c], m));
  }
  for (std::size_t c = 0; c < samples.q(); ++c) {
    const auto idx = samples.zero_coord(c);
    const double m = model_entry_unchecked(s, factors, idx);
    accumulate(idx, samples.zero_scale * loss.deriv(0.0, m));
  }
  return SparseTensor(x.dims(), std::move(coords), std::move(values),
                      {.allow_explicit_zeros = true, .build_index = false});
}

SparseTensor sampled_gradient_tensor(const SparseTensor& x,
                                     const KTensor& model,
                                     const LossFunction& loss, std::size_t p,
                                     std::size_t q, Rng& rng,
                                     std::size_t max_rejects) {
  const SampleSet samples = draw_samples(x, p, q, rng, max_rejects);
  return gradient_tensor(x, model.factors(), model.weights(), loss, samples);
}

SparseTensor full_gradient_tensor(const SparseTensor& x,
                                  const FactorList& factors, const Vector& s,
                                  const LossFunction& loss) {
  std::vector<Index> coords;
  std::vector<double> values;
  for_each_index(x.dims(), [&](std::span<const Index> idx) {
    const auto n = x.find(idx);
    const double xv = n ? x.value(*n) : 0.0;
    const double m = model_entry_unchecked(s, factors, idx);
    coords.insert(coords.end(), idx.begin(), idx.end());
    values.push_back(loss.deriv(xv, m));
  });
  return SparseTensor(x.dims(), std::move(coords), std::move(values),
                      {.allow_explicit_zeros = true});
}

}  // namespace ogcp
