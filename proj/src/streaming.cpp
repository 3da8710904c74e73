#include "ogcp/streaming.hpp"

#include <chrono>
#include <istream>
#include <limits>
#include <ostream>
#include <string>

#include "ogcp/kernels.hpp"
#include "ogcp/metrics.hpp"

namespace ogcp {

void HistoryWindow::update(Index t, const Vector& weights, Rng& rng) {
  if (capacity_ == 0) return;
  if (entries_.size() < capacity_) {
    entries_.push_back({t, weights});
    return;
  }
  std::uniform_int_distribution<Index> pick(1, t);
  const Index j = pick(rng);
  if (j <= static_cast<Index>(capacity_)) entries_[j - 1] = {t, weights};
}

std::vector<Index> HistoryWindow::steps() const {
  std::vector<Index> out;
  for (const auto& e : entries_) out.push_back(e.step);
  return out;
}

void HistoryWindow::assign(std::vector<HistoryEntry> entries) {
  if (entries.size() > capacity_)
    fail(ErrorKind::Contract, "history window exceeds its capacity");
  entries_ = std::move(entries);
}

OnlineGcp::OnlineGcp(StreamConfig cfg, LossFunction loss, StreamState state)
    : cfg_(std::move(cfg)), loss_(loss), state_(std::move(state)) {
  cfg_.solver.validate();
  detail::check_factor_list(state_.factors);
  detail::check_same_shape(state_.factors, state_.old_factors);
  if (state_.window.capacity() != cfg_.window_capacity)
    fail(ErrorKind::Contract, "window capacity does not match configuration");
}

OnlineGcp OnlineGcp::from_factors(StreamConfig cfg, LossFunction loss,
                                  FactorList factors) {
  StreamState st;
  st.old_factors = factors;
  st.factors = std::move(factors);
  st.window = HistoryWindow(cfg.window_capacity);
  return OnlineGcp(std::move(cfg), loss, std::move(st));
}

SliceReport OnlineGcp::process_slice(const SparseTensor& x_t) {
  const auto start = std::chrono::steady_clock::now();
  const Index t = state_.t + 1;
  detail::check_tensor_factors(x_t, state_.factors);

  SliceReport rep;
  rep.t = t;
  try {
    state_.factors = state_.old_factors;
    const Vector* prev =
        state_.last_weights.size() == rank() ? &state_.last_weights : nullptr;
    rep.weights = solve_weights(x_t, state_.factors, loss_, cfg_.solver, t,
                                &rep.weights_trace, prev);
    solve_factors(x_t, state_.factors, rep.weights, state_.old_factors,
                  state_.window.entries(), loss_, cfg_.solver, t, state_.solver,
                  &rep.factors_trace);
  } catch (const Error& e) {
    fail(e.kind(), "slice " + std::to_string(t) + ": " + e.what());
  }

  Rng res_rng = keyed_rng(cfg_.solver.seed, static_cast<std::uint64_t>(t),
                          RngPhase::Reservoir);
  state_.window.update(t, rep.weights, res_rng);
  state_.old_factors = state_.factors;
  state_.last_weights = rep.weights;
  state_.t = t;

  const KTensor model(rep.weights, state_.factors);
  Rng m_rng = keyed_rng(cfg_.solver.seed, static_cast<std::uint64_t>(t),
                        RngPhase::Metrics);
  const LocalLoss sampled =
      local_loss_sampled(x_t, model, loss_, cfg_.metrics_samples, m_rng,
                         cfg_.solver.max_rejects);
  rep.local_loss_sampled = sampled.value;
  rep.normalized = sampled.normalized;
  if (x_t.numel() <= cfg_.exact_loss_cell_cap)
    rep.local_loss_exact = local_loss_exact(x_t, model, loss_).value;

  rep.wall_ms = std::chrono::duration<double, std::milli>(
                    std::chrono::steady_clock::now() - start)
                    .count();
  return rep;
}

namespace {

constexpr const char* kCheckpointMagic = "ogcp-checkpoint";
constexpr int kCheckpointVersion = 2;

template <typename Dense>
void write_dense(std::ostream& out, const Dense& a) {
  out << a.rows() << ' ' << a.cols() << '\n';
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index j = 0; j < a.cols(); ++j) {
      if (j) out << ' ';
      out << a(i, j);
    }
    out << '\n';
  }
}

template <typename Dense>
Dense read_dense(std::istream& in) {
  Index rows = 0, cols = 0;
  if (!(in >> rows >> cols) || rows < 0 || cols < 0)
    fail(ErrorKind::Parse, "checkpoint: bad matrix header");
  Dense a(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j)
      if (!(in >> a(i, j))) fail(ErrorKind::Parse, "checkpoint: bad matrix entry");
  return a;
}

void write_list(std::ostream& out, const FactorList& fl) {
  out << fl.size() << '\n';
  for (const auto& a : fl) write_dense(out, a);
}

FactorList read_list(std::istream& in) {
  std::size_t n = 0;
  if (!(in >> n)) fail(ErrorKind::Parse, "checkpoint: bad factor count");
  FactorList fl;
  for (std::size_t k = 0; k < n; ++k) fl.push_back(read_dense<FactorMatrix>(in));
  return fl;
}

void expect(std::istream& in, const std::string& tag) {
  std::string got;
  if (!(in >> got) || got != tag)
    fail(ErrorKind::Parse, "checkpoint: expected '" + tag + "', got '" + got + "'");
}

}  // namespace

void OnlineGcp::save_checkpoint(std::ostream& out) const {
  const auto old_precision = out.precision();
  out.precision(std::numeric_limits<double>::max_digits10);
  out << kCheckpointMagic << ' ' << kCheckpointVersion << '\n';
  out << "t " << state_.t << '\n';
  out << "iteration " << state_.solver.iteration << '\n';
  out << "factors\n";
  write_list(out, state_.factors);
  out << "old_factors\n";
  write_list(out, state_.old_factors);
  out << "window " << state_.window.capacity() << ' ' << state_.window.size() << '\n';
  for (const auto& e : state_.window.entries()) {
    out << e.step << '\n';
    write_dense(out, e.weights);
  }
  const auto& adam = state_.solver.adam;
  out << "last_weights\n";
  write_dense(out, state_.last_weights);
  out << "adam " << (adam.initialized() ? 1 : 0) << ' ' << adam.rate() << '\n';
  if (adam.initialized()) {
    write_list(out, adam.first_moment());
    write_list(out, adam.second_moment());
    write_list(out, adam.saved_first_moment());
    write_list(out, adam.saved_second_moment());
    write_list(out, adam.saved_solution());
  }
  out << "end\n";
  out.precision(old_precision);
}

StreamState OnlineGcp::load_checkpoint(std::istream& in) {
  expect(in, kCheckpointMagic);
  int version = 0;
  if (!(in >> version) || version != kCheckpointVersion)
    fail(ErrorKind::Parse, "checkpoint: unsupported version");
  StreamState st;
  expect(in, "t");
  in >> st.t;
  expect(in, "iteration");
  in >> st.solver.iteration;
  expect(in, "factors");
  st.factors = read_list(in);
  expect(in, "old_factors");
  st.old_factors = read_list(in);
  expect(in, "window");
  std::size_t cap = 0, n = 0;
  if (!(in >> cap >> n)) fail(ErrorKind::Parse, "checkpoint: bad window header");
  std::vector<HistoryEntry> entries(n);
  for (auto& e : entries) {
    if (!(in >> e.step)) fail(ErrorKind::Parse, "checkpoint: bad window step");
    e.weights = read_dense<Vector>(in);
  }
  st.window = HistoryWindow(cap);
  st.window.assign(std::move(entries));
  expect(in, "last_weights");
  st.last_weights = read_dense<Vector>(in);
  expect(in, "adam");
  int init = 0;
  double rate = 0;
  if (!(in >> init >> rate)) fail(ErrorKind::Parse, "checkpoint: bad adam header");
  if (init) {
    auto u = read_list(in);
    auto v = read_list(in);
    auto uo = read_list(in);
    auto vo = read_list(in);
    auto ao = read_list(in);
    st.solver.adam.restore(std::move(u), std::move(v), std::move(uo),
                           std::move(vo), std::move(ao), rate);
  }
  expect(in, "end");
  return st;
}

WarmStart warm_start(const SparseTensor& block, Index rank,
                     const LossFunction& loss, const StaticConfig& cfg,
                     std::size_t window_capacity) {
  if (block.ndims() < 2)
    fail(ErrorKind::Shape, "warm-start block needs a temporal mode");
  WarmStart ws;
  ws.static_model = solve_static(block, rank, loss, cfg);
  const std::size_t d = block.ndims() - 1;
  const FactorMatrix& temporal = ws.static_model.factor(d);
  const Vector& lambda = ws.static_model.weights();
  for (std::size_t k = 0; k < d; ++k)
    ws.factors.push_back(ws.static_model.factor(k));
  ws.window = HistoryWindow(window_capacity);
  for (Index h = 0; h < temporal.rows(); ++h) {
    Vector s = temporal.row(h).transpose().cwiseProduct(lambda);
    Rng rng = keyed_rng(cfg.seed, static_cast<std::uint64_t>(h + 1),
                        RngPhase::Reservoir);
    ws.window.update(h + 1, s, rng);
    ws.temporal.push_back(std::move(s));
  }
  return ws;
}

StreamState state_from_warm_start(const WarmStart& ws) {
  StreamState st;
  st.factors = ws.factors;
  st.old_factors = ws.factors;
  st.window = ws.window;
  st.t = static_cast<Index>(ws.temporal.size());
  if (!ws.temporal.empty()) st.last_weights = ws.temporal.back();
  return st;
}

}  // namespace ogcp
