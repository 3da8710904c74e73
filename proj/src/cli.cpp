#include "ogcp/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include <Eigen/Core>

#include "ogcp/io.hpp"
#include "ogcp/metrics.hpp"
#include "ogcp/streaming.hpp"
#include "ogcp/synthetic.hpp"

namespace ogcp {

namespace {

namespace fs = std::filesystem;
constexpr double kInf = std::numeric_limits<double>::infinity();

// Raised for bad flag values found after parsing; maps to the usage exit code.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  std::string command;
  std::string preset;

  std::string input;
  bool merge_duplicates = false;
  std::string out_dir = ".";

  Index rank = 0;
  std::string loss = "gaussian";
  double eps = 1e-10;

  std::string fsamp_nz = "100000", fsamp_z = "100000";
  std::string gsamp_nz = "1000", gsamp_z = "1000";
  std::string msamp_nz = "100000", msamp_z = "100000";
  std::uint64_t seed = 1;
  std::size_t max_rejects = 0;

  double rate_w = 1e-3, rate_f = 1e-3;
  double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8, rate_decay = 0.1;
  std::string lower_bound = "auto";

  double tol_w = -kInf, tol_f = -kInf;
  int epochs_w = 1, epochs_f = 1, iters_w = 100, iters_f = 100;
  double reg_factors = 0, reg_weights = 0, hist_weight = 0, hist_decay = 1;
  std::string temporal_solver = "sgd", gradient = "sampled";
  bool warm_weights = false;

  std::size_t window = 50;
  Index warm_start = 10;
  Index slices = -1;
  int static_epochs = 50, static_iters = 100, static_restarts = 1;
  double static_rate = 1e-3;
  Index exact_cap = 10'000'000;
  std::string score_against;
  Index score_every = 0;
  Index checkpoint_every = 0;
  std::string resume;
  int threads = 0;
  bool sequential = false;
  bool plot_script = false;
  bool show_config = false;

  std::string kind = "gaussian";
  std::vector<Index> dims;
  double noise = 0.2, sparsity = 0.032;
  std::string truth_out;
  Index cell_cap = 100'000'000;

  std::string model_out;
  std::string score_a, score_b;
};

const std::map<std::string, std::vector<std::string>>& presets() {
  static const std::map<std::string, std::vector<std::string>> table = {
      {"synthetic-gaussian",
       {"--loss=gaussian", "--rank=20", "--rate-w=10", "--epochs-w=20",
        "--rate-f=1e-4", "--epochs-f=5", "--hist-weight=1", "--window=50",
        "--warm-start=10", "--hist-decay=1", "--reg-factors=0",
        "--reg-weights=0", "--iters-w=100", "--iters-f=100",
        "--fsamp-nz=10000", "--fsamp-z=0", "--gsamp-nz=10000", "--gsamp-z=0",
        "--lower-bound=-inf"}},
      {"synthetic-poisson",
       {"--loss=poisson", "--rank=20", "--rate-w=1", "--epochs-w=20",
        "--rate-f=1e-4", "--epochs-f=10", "--hist-weight=10", "--window=50",
        "--warm-start=10", "--hist-decay=1", "--reg-factors=0",
        "--reg-weights=0", "--iters-w=100", "--iters-f=100",
        "--fsamp-nz=all", "--fsamp-z=50000", "--gsamp-nz=all",
        "--gsamp-z=10000", "--lower-bound=0"}},
      {"taxicab-poisson",
       {"--loss=poisson", "--rank=50", "--rate-w=10", "--epochs-w=1",
        "--rate-f=1e-3", "--epochs-f=1", "--hist-weight=1", "--window=30",
        "--warm-start=20", "--hist-decay=1", "--reg-factors=0",
        "--reg-weights=0", "--iters-w=100", "--iters-f=100",
        "--fsamp-nz=50000", "--fsamp-z=50000", "--gsamp-nz=10000",
        "--gsamp-z=10000", "--lower-bound=0"}},
      {"chicago-binary",
       {"--loss=bernoulli", "--rank=50", "--rate-w=0.1", "--epochs-w=5",
        "--rate-f=1e-3", "--epochs-f=5", "--hist-weight=10", "--window=500",
        "--warm-start=20", "--hist-decay=1", "--reg-factors=0",
        "--reg-weights=0", "--iters-w=100", "--iters-f=100",
        "--fsamp-nz=all", "--fsamp-z=10000", "--gsamp-nz=all",
        "--gsamp-z=1000", "--lower-bound=0"}},
  };
  return table;
}

std::size_t parse_count(const std::string& s, const char* flag) {
  if (s == "all") return kAllNonzeros;
  std::size_t used = 0;
  unsigned long long v = 0;
  try {
    if (!s.empty() && s[0] == '-') throw std::invalid_argument("negative");
    v = std::stoull(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size())
    throw UsageError(std::string(flag) + ": expected a count or 'all', got '" + s + "'");
  return static_cast<std::size_t>(v);
}

SampleCounts counts(const std::string& nz, const std::string& z,
                    const char* nz_flag, const char* z_flag) {
  SampleCounts c{parse_count(nz, nz_flag), parse_count(z, z_flag)};
  if (c.zeros == kAllNonzeros)
    throw UsageError(std::string(z_flag) + ": 'all' applies only to nonzero counts");
  return c;
}

double resolve_lower_bound(const RunConfig& rc, const LossFunction& loss) {
  if (rc.lower_bound == "auto") return loss.lower_bound();
  if (rc.lower_bound == "0") return 0.0;
  if (rc.lower_bound == "-inf") return -kInf;
  throw UsageError("--lower-bound: expected 0 or -inf, got '" + rc.lower_bound + "'");
}

int resolve_threads(const RunConfig& rc) {
  if (rc.sequential) return 1;
  if (rc.threads > 0) return rc.threads;
  if (const char* env = std::getenv("OGCP_THREADS")) {
    try {
      const int n = std::stoi(env);
      if (n > 0) return n;
    } catch (const std::exception&) {
    }
    throw UsageError(std::string("OGCP_THREADS: expected a positive integer, got '") +
                     env + "'");
  }
  return 1;
}

AdamParams adam_params(const RunConfig& rc, double rate) {
  AdamParams p;
  p.rate = rate;
  p.beta1 = rc.beta1;
  p.beta2 = rc.beta2;
  p.eps = rc.adam_eps;
  p.rate_decay = rc.rate_decay;
  return p;
}

// Everything the compute paths need, resolved and validated from RunConfig.
struct Resolved {
  LossFunction loss{LossKind::Gaussian};
  StreamConfig stream;
  StaticConfig static_cfg;
  int threads = 1;
};

Resolved resolve(const RunConfig& rc) {
  try {
    Resolved r;
    r.loss = LossFunction(parse_loss_kind(rc.loss), rc.eps);
    const double lb = resolve_lower_bound(rc, r.loss);
    const SampleCounts fsamp = counts(rc.fsamp_nz, rc.fsamp_z, "--fsamp-nz", "--fsamp-z");
    const SampleCounts gsamp = counts(rc.gsamp_nz, rc.gsamp_z, "--gsamp-nz", "--gsamp-z");

    SolverConfig& s = r.stream.solver;
    s.weights = {rc.tol_w, rc.epochs_w, rc.iters_w, adam_params(rc, rc.rate_w), fsamp, gsamp};
    s.factors = {rc.tol_f, rc.epochs_f, rc.iters_f, adam_params(rc, rc.rate_f), fsamp, gsamp};
    s.lambda = rc.reg_factors;
    s.mu = rc.reg_weights;
    s.history_weight = rc.hist_weight;
    s.history_decay = rc.hist_decay;
    s.lower_bound = lb;
    s.temporal_mode = parse_temporal_mode(rc.temporal_solver);
    s.gradient_mode = parse_gradient_mode(rc.gradient);
    s.warm_start_weights = rc.warm_weights;
    s.seed = rc.seed;
    s.max_rejects = rc.max_rejects;
    s.validate();
    // ADAM parameters are checked when a stepper is built; do it now so bad
    // flags surface before any compute.
    AdamStepper<Vector> check_w(s.weights.adam);
    AdamStepper<Vector> check_f(s.factors.adam);
    if (s.temporal_mode == TemporalMode::LeastSquares &&
        r.loss.kind() != LossKind::Gaussian)
      throw UsageError("--temporal-solver ls requires --loss gaussian");
    if (s.gradient_mode == GradientMode::DenseGaussian &&
        r.loss.kind() != LossKind::Gaussian)
      throw UsageError("--gradient dense-gaussian requires --loss gaussian");

    r.stream.window_capacity = rc.window;
    r.stream.metrics_samples = counts(rc.msamp_nz, rc.msamp_z, "--msamp-nz", "--msamp-z");
    r.stream.exact_loss_cell_cap = rc.exact_cap;

    r.static_cfg.sgd = {-kInf, rc.static_epochs, rc.static_iters,
                        adam_params(rc, rc.static_rate), fsamp, gsamp};
    r.static_cfg.lambda = rc.reg_factors;
    r.static_cfg.lower_bound = lb;
    r.static_cfg.seed = rc.seed;
    r.static_cfg.max_rejects = rc.max_rejects;
    r.static_cfg.restarts = rc.static_restarts;
    r.static_cfg.validate();
    AdamStepper<Vector> check_s(r.static_cfg.sgd.adam);

    r.threads = resolve_threads(rc);
    return r;
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
}

nlohmann::ordered_json config_json(const RunConfig& rc, const Resolved& r) {
  const auto& s = r.stream.solver;
  auto count_json = [](std::size_t c) -> nlohmann::ordered_json {
    if (c == kAllNonzeros) return "all";
    return c;
  };
  auto bound_json = [](double v) -> nlohmann::ordered_json {
    if (std::isinf(v)) return v < 0 ? "-inf" : "inf";
    return v;
  };
  nlohmann::ordered_json j;
  j["command"] = rc.command;
  j["preset"] = rc.preset;
  j["input"] = rc.input;
  j["out_dir"] = rc.out_dir;
  j["merge_duplicates"] = rc.merge_duplicates;
  j["rank"] = rc.rank;
  j["loss"] = to_string(r.loss.kind());
  j["eps"] = r.loss.eps();
  j["fsamp_nz"] = count_json(s.weights.objective.nonzeros);
  j["fsamp_z"] = count_json(s.weights.objective.zeros);
  j["gsamp_nz"] = count_json(s.weights.gradient.nonzeros);
  j["gsamp_z"] = count_json(s.weights.gradient.zeros);
  j["msamp_nz"] = count_json(r.stream.metrics_samples.nonzeros);
  j["msamp_z"] = count_json(r.stream.metrics_samples.zeros);
  j["seed"] = s.seed;
  j["max_rejects"] = s.max_rejects;
  j["rate_w"] = s.weights.adam.rate;
  j["rate_f"] = s.factors.adam.rate;
  j["adam_beta1"] = rc.beta1;
  j["adam_beta2"] = rc.beta2;
  j["adam_eps"] = rc.adam_eps;
  j["rate_decay"] = rc.rate_decay;
  j["lower_bound"] = bound_json(s.lower_bound);
  j["tol_w"] = bound_json(s.weights.tol);
  j["tol_f"] = bound_json(s.factors.tol);
  j["epochs_w"] = s.weights.max_epochs;
  j["epochs_f"] = s.factors.max_epochs;
  j["iters_w"] = s.weights.iters_per_epoch;
  j["iters_f"] = s.factors.iters_per_epoch;
  j["reg_factors"] = s.lambda;
  j["reg_weights"] = s.mu;
  j["hist_weight"] = s.history_weight;
  j["hist_decay"] = s.history_decay;
  j["temporal_solver"] = to_string(s.temporal_mode);
  j["gradient"] = to_string(s.gradient_mode);
  j["warm_weights"] = s.warm_start_weights;
  j["window"] = r.stream.window_capacity;
  j["warm_start"] = rc.warm_start;
  j["slices"] = rc.slices;
  j["static_epochs"] = r.static_cfg.sgd.max_epochs;
  j["static_iters"] = r.static_cfg.sgd.iters_per_epoch;
  j["static_rate"] = r.static_cfg.sgd.adam.rate;
  j["static_restarts"] = r.static_cfg.restarts;
  j["exact_cell_cap"] = r.stream.exact_loss_cell_cap;
  j["score_against"] = rc.score_against;
  j["score_every"] = rc.score_every;
  j["checkpoint_every"] = rc.checkpoint_every;
  j["resume"] = rc.resume;
  j["threads"] = r.threads;
  j["sequential"] = rc.sequential;
  j["plot_script"] = rc.plot_script;
  return j;
}

// Joins `--flag -inf` into `--flag=-inf` so negative infinity is not taken
// for a short option.
std::vector<std::string> join_negative_values(const std::vector<std::string>& args) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < args.size(); ++i) {
    const std::string& a = args[i];
    if (a.rfind("--", 0) == 0 && a.find('=') == std::string::npos &&
        i + 1 < args.size() && args[i + 1] == "-inf") {
      out.push_back(a + "=-inf");
      ++i;
    } else {
      out.push_back(a);
    }
  }
  return out;
}

// Inserts the preset's flags right after the subcommand so explicit flags,
// which come later, override them.
std::vector<std::string> expand_preset(std::vector<std::string> args) {
  std::string name;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--preset" && i + 1 < args.size()) name = args[i + 1];
    else if (args[i].rfind("--preset=", 0) == 0) name = args[i].substr(9);
  }
  if (name.empty()) return args;
  const auto it = presets().find(name);
  if (it == presets().end()) {
    std::string known;
    for (const auto& [k, v] : presets()) known += (known.empty() ? "" : ", ") + k;
    throw UsageError("--preset: unknown preset '" + name + "' (known: " + known + ")");
  }
  if (args.empty()) return args;
  args.insert(args.begin() + 1, it->second.begin(), it->second.end());
  return args;
}

void add_loss_options(CLI::App* app, RunConfig& rc) {
  app->add_option("--loss", rc.loss, "gaussian | poisson | bernoulli");
  app->add_option("--eps", rc.eps, "epsilon inside logs and denominators");
  app->add_option("--rank", rc.rank, "CP rank R");
  app->add_option("--seed", rc.seed, "master random seed");
  app->add_option("--lower-bound", rc.lower_bound, "0 | -inf (default from the loss)");
}

void add_sampling_options(CLI::App* app, RunConfig& rc) {
  app->add_option("--fsamp-nz", rc.fsamp_nz, "objective nonzero samples p' (or 'all')");
  app->add_option("--fsamp-z", rc.fsamp_z, "objective zero samples q'");
  app->add_option("--gsamp-nz", rc.gsamp_nz, "gradient nonzero samples p (or 'all')");
  app->add_option("--gsamp-z", rc.gsamp_z, "gradient zero samples q");
  app->add_option("--max-rejects", rc.max_rejects,
                  "zero-candidate rejection budget per draw (0: 1000*q)");
  app->add_option("--adam-beta1", rc.beta1);
  app->add_option("--adam-beta2", rc.beta2);
  app->add_option("--adam-eps", rc.adam_eps);
  app->add_option("--rate-decay", rc.rate_decay, "rate multiplier after a rejected epoch");
  app->add_option("--reg-factors", rc.reg_factors, "factor regularization lambda");
  app->add_flag("--merge-duplicates", rc.merge_duplicates,
                "sum repeated coordinates in the input");
  app->add_option("--static-epochs", rc.static_epochs, "static / warm-start epochs");
  app->add_option("--static-iters", rc.static_iters, "static / warm-start iterations per epoch");
  app->add_option("--static-rate", rc.static_rate, "static / warm-start ADAM rate");
  app->add_option("--static-restarts", rc.static_restarts,
                  "static / warm-start random starts, best objective kept");
  app->add_option("--exact-cell-cap", rc.exact_cap,
                  "largest slice for which exact losses are computed");
  app->add_option("--threads", rc.threads, "kernel thread cap (env OGCP_THREADS)");
  app->add_flag("--show-config", rc.show_config, "print the resolved configuration and exit");
}

void add_stream_options(CLI::App* app, RunConfig& rc) {
  app->add_option("--preset", rc.preset,
                  "synthetic-gaussian | synthetic-poisson | taxicab-poisson | chicago-binary");
  app->add_option("--rate-w", rc.rate_w);
  app->add_option("--rate-f", rc.rate_f);
  app->add_option("--tol-w", rc.tol_w);
  app->add_option("--tol-f", rc.tol_f);
  app->add_option("--epochs-w", rc.epochs_w);
  app->add_option("--epochs-f", rc.epochs_f);
  app->add_option("--iters-w", rc.iters_w);
  app->add_option("--iters-f", rc.iters_f);
  app->add_option("--reg-weights", rc.reg_weights, "temporal regularization mu");
  app->add_option("--hist-weight", rc.hist_weight, "history penalty weight w");
  app->add_option("--hist-decay", rc.hist_decay, "history decay theta");
  app->add_option("--temporal-solver", rc.temporal_solver, "sgd | ls");
  app->add_option("--gradient", rc.gradient, "sampled | dense-gaussian");
  app->add_flag("--warm-weights", rc.warm_weights,
                "start each temporal solve from the previous weights");
  app->add_option("--window", rc.window, "history window capacity H");
  app->add_option("--warm-start", rc.warm_start, "warm-start slices H_init");
  app->add_option("--slices", rc.slices, "slices to stream after the warm start (-1: all)");
  app->add_option("--msamp-nz", rc.msamp_nz, "sampled local-loss nonzero samples");
  app->add_option("--msamp-z", rc.msamp_z, "sampled local-loss zero samples");
  app->add_option("--score-against", rc.score_against, "ground-truth K-tensor");
  app->add_option("--score-every", rc.score_every,
                  "print congruence every n streamed slices (0: final only)");
  app->add_option("--checkpoint-every", rc.checkpoint_every,
                  "write checkpoint.txt every n streamed slices");
  app->add_option("--resume", rc.resume, "continue from a checkpoint file");
  app->add_flag("--sequential", rc.sequential,
                "single thread, wall_ms written as 0 for byte-identical outputs");
  app->add_flag("--plot-script", rc.plot_script, "write plot_metrics.py next to metrics.csv");
}

std::string fmt(double v) {
  std::ostringstream s;
  s << std::setprecision(17) << v;
  return s.str();
}

// ---------------------------------------------------------------- stream

struct MetricsRow {
  Index t;
  double sampled;
  std::optional<double> exact;
  int epochs_w, epochs_f;
  double wall_ms;
};

std::string csv_row(const MetricsRow& r) {
  std::string line = std::to_string(r.t) + "," + fmt(r.sampled) + ",";
  if (r.exact) line += fmt(*r.exact);
  line += "," + std::to_string(r.epochs_w) + "," + std::to_string(r.epochs_f) +
          "," + fmt(r.wall_ms);
  return line;
}

constexpr const char* kMetricsHeader =
    "t,local_loss_sampled,local_loss_exact,epochs_w,epochs_f,wall_ms";

KTensor temporal_model(const FactorList& factors, const std::vector<Vector>& temporal,
                       Index rank) {
  FactorList all = factors;
  FactorMatrix s(static_cast<Index>(temporal.size()), rank);
  for (std::size_t h = 0; h < temporal.size(); ++h)
    s.row(static_cast<Index>(h)) = temporal[h].transpose();
  all.push_back(std::move(s));
  return KTensor(Vector::Ones(rank), std::move(all));
}

KTensor truncate_temporal(const KTensor& m, Index rows) {
  FactorList f = m.factors();
  f.back() = FactorMatrix(f.back().topRows(rows));
  return KTensor(m.weights(), std::move(f));
}

void write_checkpoint(const fs::path& path, const OnlineGcp& gcp,
                      const std::vector<Vector>& temporal) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::Io, "cannot open '" + path.string() + "' for writing");
  gcp.save_checkpoint(out);
  out << std::setprecision(17);
  out << "temporal " << temporal.size() << ' ' << gcp.rank() << '\n';
  for (const auto& s : temporal) {
    for (Index j = 0; j < s.size(); ++j) out << (j ? " " : "") << s(j);
    out << '\n';
  }
  if (!out) fail(ErrorKind::Io, "checkpoint write failed");
}

std::pair<StreamState, std::vector<Vector>> read_checkpoint(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot open '" + path.string() + "'");
  StreamState st = OnlineGcp::load_checkpoint(in);
  std::string tag;
  std::size_t n = 0;
  Index rank = 0;
  if (!(in >> tag >> n >> rank) || tag != "temporal")
    fail(ErrorKind::Parse, "checkpoint: missing temporal weights");
  std::vector<Vector> temporal(n, Vector(rank));
  for (auto& s : temporal)
    for (Index j = 0; j < rank; ++j)
      if (!(in >> s(j))) fail(ErrorKind::Parse, "checkpoint: truncated temporal weights");
  if (static_cast<Index>(n) != st.t)
    fail(ErrorKind::Parse, "checkpoint: temporal weights do not match step count");
  return {std::move(st), std::move(temporal)};
}

// Rows with t <= last_t from an existing metrics file, for resumed runs.
std::vector<std::string> kept_metrics(const fs::path& path, Index last_t) {
  std::vector<std::string> rows;
  std::ifstream in(path);
  std::string line;
  if (!in || !std::getline(in, line)) return rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const Index t = std::stoll(line.substr(0, line.find(',')));
    if (t <= last_t) rows.push_back(line);
  }
  return rows;
}

void write_plot_script(const fs::path& dir) {
  std::ofstream out(dir / "plot_metrics.py");
  out << "import csv\n"
         "import os\n"
         "import matplotlib\n"
         "matplotlib.use('Agg')\n"
         "import matplotlib.pyplot as plt\n\n"
         "here = os.path.dirname(os.path.abspath(__file__))\n"
         "with open(os.path.join(here, 'metrics.csv')) as f:\n"
         "    rows = list(csv.DictReader(f))\n"
         "t = [int(r['t']) for r in rows]\n"
         "sampled = [float(r['local_loss_sampled']) for r in rows]\n"
         "exact = [(int(r['t']), float(r['local_loss_exact'])) for r in rows"
         " if r['local_loss_exact']]\n"
         "fig, ax = plt.subplots()\n"
         "ax.plot(t, sampled, label='local loss (sampled)')\n"
         "if exact:\n"
         "    ax.plot([e[0] for e in exact], [e[1] for e in exact],"
         " label='local loss (exact)')\n"
         "ax.set_xlabel('t')\n"
         "ax.set_ylabel('normalized local loss')\n"
         "ax.set_yscale('log')\n"
         "ax.legend()\n"
         "fig.savefig(os.path.join(here, 'local_loss.png'), dpi=150)\n";
  if (!out) fail(ErrorKind::Io, "cannot write plot_metrics.py");
}

int cmd_stream(const RunConfig& rc, std::ostream& out) {
  Resolved r = resolve(rc);
  if (rc.input.empty()) throw UsageError("stream: an input .tns file is required");
  if (rc.rank < 1) throw UsageError("--rank must be >= 1");
  if (rc.warm_start < 1) throw UsageError("--warm-start must be >= 1");
  if (rc.score_every < 0 || rc.checkpoint_every < 0)
    throw UsageError("--score-every and --checkpoint-every must be >= 0");
  if (rc.show_config) {
    out << config_json(rc, r).dump(2) << '\n';
    return kExitOk;
  }
  Eigen::setNbThreads(r.threads);

  const SparseTensor x = read_tns(rc.input, {rc.merge_duplicates});
  if (x.ndims() < 2) fail(ErrorKind::Shape, "stream input needs at least 2 modes");
  SliceStream stream(x);
  const Index total = stream.num_slices();
  std::optional<KTensor> truth;
  if (!rc.score_against.empty()) {
    truth = read_ktensor(rc.score_against);
    if (truth->dims() != x.dims())
      fail(ErrorKind::Shape, "--score-against K-tensor dims do not match the input");
  }

  const fs::path dir(rc.out_dir);
  fs::create_directories(dir);
  const LossFunction& loss = r.loss;
  const Index rank = rc.rank;

  std::vector<Vector> temporal;
  std::vector<std::string> rows;
  std::optional<OnlineGcp> gcp;

  auto slice_metrics = [&](const SparseTensor& xt, const KTensor& m, Index t) {
    Rng rng = keyed_rng(rc.seed, static_cast<std::uint64_t>(t), RngPhase::Metrics);
    MetricsRow row{t, 0, std::nullopt, 0, 0, 0};
    row.sampled = local_loss_sampled(xt, m, loss, r.stream.metrics_samples, rng,
                                     rc.max_rejects).value;
    if (xt.numel() <= r.stream.exact_loss_cell_cap)
      row.exact = local_loss_exact(xt, m, loss).value;
    return row;
  };

  if (!rc.resume.empty()) {
    auto [st, tw] = read_checkpoint(rc.resume);
    if (st.factors.size() != x.ndims() - 1 || st.factors.front().cols() != rank)
      fail(ErrorKind::Shape, "checkpoint does not match the input and rank");
    rows = kept_metrics(dir / "metrics.csv", st.t);
    temporal = std::move(tw);
    gcp.emplace(r.stream, loss, std::move(st));
  } else {
    if (rc.warm_start > total)
      fail(ErrorKind::Shape, "--warm-start " + std::to_string(rc.warm_start) +
                                 " exceeds the " + std::to_string(total) +
                                 " slices in the input");
    const SparseTensor block = last_mode_range(x, 0, rc.warm_start);
    const WarmStart ws = warm_start(block, rank, loss, r.static_cfg, rc.window);
    temporal = ws.temporal;
    for (Index h = 0; h < rc.warm_start; ++h) {
      const KTensor m(temporal[h], ws.factors);
      rows.push_back(csv_row(slice_metrics(stream.slice(h), m, h + 1)));
    }
    gcp.emplace(r.stream, loss, state_from_warm_start(ws));
  }

  Index end = total;
  if (rc.slices >= 0) end = std::min(total, gcp->state().t + rc.slices);
  std::ofstream metrics(dir / "metrics.csv");
  if (!metrics) fail(ErrorKind::Io, "cannot write metrics.csv");
  metrics << kMetricsHeader << '\n';
  for (const auto& row : rows) metrics << row << '\n';
  metrics.flush();

  Index streamed = 0;
  for (Index t0 = gcp->state().t; t0 < end; ++t0) {
    const SparseTensor xt = stream.slice(t0);
    const SliceReport rep = gcp->process_slice(xt);
    temporal.push_back(rep.weights);
    const MetricsRow row{rep.t,
                         rep.local_loss_sampled,
                         rep.local_loss_exact,
                         rep.weights_trace.epochs,
                         rep.factors_trace.epochs,
                         rc.sequential ? 0.0 : rep.wall_ms};
    metrics << csv_row(row) << '\n';
    metrics.flush();
    ++streamed;
    if (truth && rc.score_every > 0 && streamed % rc.score_every == 0) {
      const KTensor m = temporal_model(gcp->state().factors, temporal, rank);
      out << "congruence t=" << rep.t << ' '
          << congruence_score(m, truncate_temporal(*truth, rep.t)) << '\n';
    }
    if (rc.checkpoint_every > 0 && streamed % rc.checkpoint_every == 0)
      write_checkpoint(dir / "checkpoint.txt", *gcp, temporal);
  }

  const FactorList& factors = gcp->state().factors;
  const Index processed = static_cast<Index>(temporal.size());
  const KTensor final_model = temporal_model(factors, temporal, rank);
  write_ktensor(final_model, dir / "model.ktns");
  if (rc.plot_script) write_plot_script(dir);

  bool exact_ok = true;
  std::vector<SparseTensor> slices;
  for (Index t = 0; t < processed; ++t) {
    slices.push_back(stream.slice(t));
    if (slices.back().numel() > r.stream.exact_loss_cell_cap) exact_ok = false;
  }
  if (exact_ok)
    out << "global_loss " << global_loss(slices, factors, temporal, loss) << '\n';
  else
    out << "global_loss skipped (slices exceed --exact-cell-cap)\n";
  if (truth)
    out << "congruence " << congruence_score(final_model, truncate_temporal(*truth, processed))
        << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------- static

int cmd_static(const RunConfig& rc, std::ostream& out) {
  Resolved r = resolve(rc);
  if (rc.input.empty()) throw UsageError("static: an input .tns file is required");
  if (rc.rank < 1) throw UsageError("--rank must be >= 1");
  if (rc.show_config) {
    out << config_json(rc, r).dump(2) << '\n';
    return kExitOk;
  }
  Eigen::setNbThreads(r.threads);
  const SparseTensor x = read_tns(rc.input, {rc.merge_duplicates});
  EpochTrace trace;
  const KTensor model = solve_static(x, rc.rank, r.loss, r.static_cfg, nullptr, &trace);
  if (!rc.model_out.empty()) write_ktensor(model, rc.model_out);
  if (x.numel() <= rc.exact_cap) {
    out << "local_loss " << local_loss_exact(x, model, r.loss).value << '\n';
  } else {
    Rng rng = keyed_rng(rc.seed, 0, RngPhase::Metrics);
    out << "local_loss_sampled "
        << local_loss_sampled(x, model, r.loss, r.stream.metrics_samples, rng,
                              rc.max_rejects).value
        << '\n';
  }
  out << "epochs " << trace.epochs << " rejected " << trace.rejected << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------- gen

int cmd_gen(const RunConfig& rc, std::ostream& out) {
  SyntheticSpec spec;
  if (rc.kind == "gaussian") spec.kind = SyntheticKind::Gaussian;
  else if (rc.kind == "poisson") spec.kind = SyntheticKind::Poisson;
  else throw UsageError("--kind: expected gaussian or poisson, got '" + rc.kind + "'");
  spec.dims = rc.dims;
  spec.rank = rc.rank;
  spec.noise = rc.noise;
  spec.fraction = rc.sparsity;
  spec.seed = rc.seed;
  spec.cell_cap = rc.cell_cap;
  try {
    spec.validate();
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  const SyntheticData data = generate(spec);
  write_tns(data.tensor, rc.model_out);
  const std::string truth =
      rc.truth_out.empty() ? rc.model_out + ".truth.ktns" : rc.truth_out;
  write_ktensor(data.truth, truth);
  out << "nnz " << data.tensor.nnz() << " fraction "
      << static_cast<double>(data.tensor.nnz()) / data.tensor.numel_float() << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------- score

int cmd_score(const RunConfig& rc, std::ostream& out) {
  const KTensor a = read_ktensor(rc.score_a);
  const KTensor b = read_ktensor(rc.score_b);
  out << std::fixed << std::setprecision(6) << congruence_score(a, b) << '\n';
  return kExitOk;
}

std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

int report(std::ostream& err, const char* kind, const std::string& what, int code) {
  err << "ogcp: error: " << kind << ": " << one_line(what) << '\n';
  return code;
}

}  // namespace

int run_cli(const std::vector<std::string>& raw_args, std::ostream& out,
            std::ostream& err) {
  RunConfig rc;
  CLI::App app{"Streaming GCP tensor decomposition", "ogcp"};
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.require_subcommand(1);

  CLI::App* stream = app.add_subcommand("stream", "warm-start and stream the last mode");
  stream->add_option("input", rc.input, ".tns file, last mode is time");
  stream->add_option("--out", rc.out_dir, "output directory");
  add_loss_options(stream, rc);
  add_sampling_options(stream, rc);
  add_stream_options(stream, rc);

  CLI::App* stat = app.add_subcommand("static", "static GCP fit of a whole tensor");
  stat->add_option("input", rc.input, ".tns file");
  stat->add_option("--out", rc.model_out, "K-tensor output path");
  add_loss_options(stat, rc);
  add_sampling_options(stat, rc);

  CLI::App* gen = app.add_subcommand("gen", "generate synthetic data");
  gen->add_option("--kind", rc.kind, "gaussian | poisson");
  gen->add_option("--dims", rc.dims, "comma separated dims")->delimiter(',')->required();
  gen->add_option("--rank", rc.rank)->required();
  gen->add_option("--noise", rc.noise, "gaussian noise standard deviation");
  gen->add_option("--sparsity", rc.sparsity, "poisson target nonzero fraction");
  gen->add_option("--seed", rc.seed);
  gen->add_option("--cell-cap", rc.cell_cap, "largest dense gaussian tensor");
  gen->add_option("--out", rc.model_out, ".tns output path")->required();
  gen->add_option("--truth", rc.truth_out, "ground-truth K-tensor path (default <out>.truth.ktns)");

  CLI::App* score = app.add_subcommand("score", "congruence of two K-tensors");
  score->add_option("a", rc.score_a)->required();
  score->add_option("b", rc.score_b)->required();

  try {
    std::vector<std::string> args = expand_preset(join_negative_values(raw_args));
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return kExitOk;
    }
    return report(err, "usage", e.what(), kExitUsage);
  } catch (const UsageError& e) {
    return report(err, "usage", e.what(), kExitUsage);
  }

  try {
    rc.command = app.get_subcommands().front()->get_name();
    if (*stream) return cmd_stream(rc, out);
    if (*stat) return cmd_static(rc, out);
    if (*gen) return cmd_gen(rc, out);
    if (*score) return cmd_score(rc, out);
  } catch (const UsageError& e) {
    return report(err, "usage", e.what(), kExitUsage);
  } catch (const Error& e) {
    const bool numeric =
        e.kind() == ErrorKind::Divergence || e.kind() == ErrorKind::LinearSolve;
    return report(err, to_string(e.kind()), e.what(), numeric ? kExitNumeric : kExitData);
  } catch (const fs::filesystem_error& e) {
    return report(err, "io", e.what(), kExitData);
  }
  return kExitUsage;
}

}  // namespace ogcp
