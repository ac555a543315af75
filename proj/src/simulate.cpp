#include "bvlmc/simulate.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "bvlmc/error.hpp"
#include "bvlmc/glm.hpp"

namespace bvlmc {

namespace {

// Uniform and normal draws defined directly on the 64-bit Mersenne
// Twister output, so datasets are identical across standard libraries.
class Stream {
 public:
  explicit Stream(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

ParamBlock binary_block(double alpha, std::vector<double> beta) {
  ParamBlock block(2, 1, static_cast<int>(beta.size()));
  block.alpha(0) = alpha;
  for (std::size_t i = 0; i < beta.size(); ++i) block.beta(0, static_cast<Eigen::Index>(i)) = beta[i];
  return block.trimmed();
}

using LeafList = std::vector<std::pair<Context, std::optional<ParamBlock>>>;

LeafList model1_leaves() {
  return {
      {Context::parse("00"), binary_block(0.1, {2, 0})},
      {Context::parse("010"), binary_block(0.25, {-1, 1, 0})},
      {Context::parse("0110"), binary_block(0.8, {4, 3, 2, 1})},
      {Context::parse("0111"), binary_block(2, {1.5, 2, 0, 0})},
      {Context::parse("10"), binary_block(-0.2, {0, 0})},
      {Context::parse("11"), binary_block(-1, {0, 0})},
  };
}

LeafList model2_leaves(bool with_covariates) {
  const auto b = [&](std::vector<double> beta) {
    if (!with_covariates) std::fill(beta.begin(), beta.end(), 0.0);
    return beta;
  };
  return {
      {Context::parse("000"), binary_block(0.5, b({3, 1, 2}))},
      {Context::parse("001"), binary_block(0.8, b({1, 0, 0}))},
      {Context::parse("01"), binary_block(1, b({-1, -2}))},
      {Context::parse("10"), binary_block(-0.2, b({-1.2, 0}))},
      {Context::parse("11"), binary_block(0.5, b({0, 0}))},
  };
}

SampleSummary summarize(const std::vector<double>& xs) {
  SampleSummary out;
  out.count = static_cast<int>(xs.size());
  if (xs.empty()) return out;
  double sum = 0.0;
  for (double x : xs) sum += x;
  out.mean = sum / out.count;
  if (out.count > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - out.mean) * (x - out.mean);
    out.sd = std::sqrt(ss / (out.count - 1));
  }
  return out;
}

std::size_t bucket(int count) { return count >= 0 && count <= 10 ? static_cast<std::size_t>(count / 2) : 6; }

}  // namespace

ModelSpec builtin_model(std::string_view name) {
  if (name == "model1") return {"model1", ContextTree::from_leaves(2, 1, model1_leaves())};
  if (name == "model2") return {"model2", ContextTree::from_leaves(2, 1, model2_leaves(true))};
  if (name == "model3") return {"model3", ContextTree::from_leaves(2, 1, model2_leaves(false))};
  throw UnknownModel("unknown built-in model \"" + std::string(name) + "\" (expected model1, model2 or model3)");
}

Dataset generate(const ModelSpec& spec, std::size_t n, std::uint64_t seed, std::size_t burn_in) {
  const ContextTree& tree = spec.tree;
  if (!tree.fully_parameterized()) throw UsageError("model " + spec.name + " has leaves without parameters");
  const std::size_t eta = static_cast<std::size_t>(tree.order());
  const std::size_t total = eta + burn_in + n;
  const int d = tree.d();

  Stream rng(seed);
  Dataset full;
  full.p = tree.p();
  full.covariates.resize(static_cast<Eigen::Index>(total), d);
  for (std::size_t t = 0; t < total; ++t)
    for (int j = 0; j < d; ++j) full.covariates(static_cast<Eigen::Index>(t), j) = rng.normal();
  full.states.assign(total, 0);

  for (std::size_t t = eta; t < total; ++t) {
    const Context leaf = tree.resolve(full.states, t);
    const ParamBlock& block = *tree.block(leaf);
    const Eigen::VectorXd prob = transition_probabilities(block, recent_covariates(full, t, block.h));
    const double u = rng.uniform();
    double cumulative = 0.0;
    int y = full.p - 1;
    for (int k = 0; k < full.p; ++k) {
      cumulative += prob(k);
      if (u < cumulative) {
        y = k;
        break;
      }
    }
    full.states[t] = y;
  }

  Dataset out;
  out.p = full.p;
  const std::size_t start = eta + burn_in;
  out.states.assign(full.states.begin() + static_cast<std::ptrdiff_t>(start), full.states.end());
  out.covariates = full.covariates.bottomRows(static_cast<Eigen::Index>(n));
  return out;
}

EvalMetrics compare_trees(const ModelSpec& truth, const FitReport& fitted) {
  const ContextTree& t = truth.tree;
  const ContextTree& f = fitted.tree;
  if (t.p() != f.p() || t.d() != f.d()) throw AlphabetMismatch("truth and fit differ in state or covariate dimension");

  EvalMetrics m;
  m.bic = fitted.bic;
  m.aic = fitted.aic;
  m.loglik = fitted.loglik;
  m.n_alpha = fitted.n_alpha;
  m.n_beta = fitted.n_beta;
  m.order_tree = fitted.order_tree();
  m.order_covar = fitted.order_covar();

  const auto truth_nodes = t.nodes();
  const auto fit_nodes = f.nodes();
  const std::set<Context> ts(truth_nodes.begin(), truth_nodes.end());
  const std::set<Context> fs(fit_nodes.begin(), fit_nodes.end());
  for (const auto& u : ts) m.missing += !fs.count(u);
  for (const auto& u : fs) m.extra += !ts.count(u);
  m.identical_tau = m.missing == 0 && m.extra == 0;
  if (m.identical_tau) {
    m.identical_tau_theta = true;
    for (const auto& u : t.leaves()) {
      const auto& tb = t.block(u);
      const auto& fb = f.block(u);
      if (!tb || !fb || tb->trimmed().h != fb->h) m.identical_tau_theta = false;
    }
  }
  return m;
}

const CoefficientSummary* MonteCarloReport::coefficient(const Context& u, int lag, int covariate, int target) const {
  for (const auto& c : coefficients)
    if (c.context == u && c.lag == lag && c.covariate == covariate && c.target == target) return &c;
  return nullptr;
}

MonteCarloReport monte_carlo(const ModelSpec& spec, const MonteCarloOptions& options) {
  if (options.runs < 1) throw UsageError("need at least one Monte Carlo run");

  struct RunResult {
    bool ok = false;
    std::string error;
    EvalMetrics metrics;
    FitReport report;
  };
  std::vector<RunResult> results(static_cast<std::size_t>(options.runs));

  const auto run_one = [&](std::size_t i) {
    RunResult& r = results[i];
    try {
      const Dataset data = generate(spec, options.n, options.base_seed + i);
      r.report = options.tune ? select_tuning(data, options.s_grid, options.gamma_grid, options.config, options.criterion).report
                              : fit(data, options.config);
      r.metrics = compare_trees(spec, r.report);
      r.ok = true;
    } catch (const Error& e) {
      r.error = "run " + std::to_string(i) + ": " + e.what();
    }
  };

  unsigned threads = options.threads ? options.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(options.runs));
  if (threads <= 1) {
    for (std::size_t i = 0; i < results.size(); ++i) run_one(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < threads; ++w)
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < results.size(); i = next++) run_one(i);
      });
    for (auto& th : pool) th.join();
  }

  MonteCarloReport out;
  out.model = spec.name;
  out.n = options.n;
  out.runs = options.runs;

  // True nonzero coefficients, in context/target/lag/covariate order.
  struct Slot {
    CoefficientSummary summary;
    std::vector<double> all;
    std::vector<double> filtered;
  };
  std::vector<Slot> slots;
  for (const auto& u : spec.tree.leaves()) {
    const ParamBlock block = spec.tree.block(u)->trimmed();
    for (int k = 0; k < block.p() - 1; ++k)
      for (int lag = 0; lag < block.h; ++lag)
        for (int j = 0; j < block.d; ++j)
          if (block.coef(k, lag, j) != 0.0) {
            Slot slot;
            slot.summary.context = u;
            slot.summary.target = k + 1;
            slot.summary.lag = lag + 1;
            slot.summary.covariate = j;
            slot.summary.truth = block.coef(k, lag, j);
            slots.push_back(std::move(slot));
          }
  }

  int ok = 0;
  for (auto& r : results) {
    if (!r.ok) {
      ++out.failures;
      out.errors.push_back(r.error);
      continue;
    }
    ++ok;
    const EvalMetrics& m = r.metrics;
    out.per_run.push_back(m);
    out.bic += m.bic;
    out.aic += m.aic;
    out.loglik += m.loglik;
    out.n_alpha += m.n_alpha;
    out.n_beta += m.n_beta;
    out.order_tree += m.order_tree;
    out.order_covar += m.order_covar;
    out.missing += m.missing;
    out.extra += m.extra;
    out.identical_tau += m.identical_tau;
    out.identical_tau_theta += m.identical_tau_theta;
    ++out.missing_histogram[bucket(m.missing)];
    ++out.extra_histogram[bucket(m.extra)];

    for (auto& slot : slots) {
      const Context& u = slot.summary.context;
      if (!r.report.tree.is_leaf(u)) continue;
      const ParamBlock& fitted = *r.report.tree.block(u);
      const ParamBlock truth = spec.tree.block(u)->trimmed();
      if (fitted.h != truth.h) continue;
      const double value = fitted.coef(slot.summary.target - 1, slot.summary.lag - 1, slot.summary.covariate);
      slot.all.push_back(value);
      const auto diag = std::find_if(r.report.leaves.begin(), r.report.leaves.end(),
                                     [&](const LeafDiagnostics& l) { return l.context == u; });
      if (diag != r.report.leaves.end() && diag->status == FitStatus::Converged) slot.filtered.push_back(value);
    }
  }
  if (ok > 0) {
    for (double* field : {&out.bic, &out.aic, &out.loglik, &out.n_alpha, &out.n_beta, &out.order_tree,
                          &out.order_covar, &out.missing, &out.extra, &out.identical_tau, &out.identical_tau_theta})
      *field /= ok;
  }
  for (auto& slot : slots) {
    slot.summary.all = summarize(slot.all);
    slot.summary.filtered = summarize(slot.filtered);
    out.coefficients.push_back(std::move(slot.summary));
  }
  return out;
}

nlohmann::json monte_carlo_to_json(const MonteCarloReport& report) {
  using nlohmann::json;
  const auto hist = [](const std::array<int, 7>& h) {
    return json{{"0", h[0]}, {"2", h[1]}, {"4", h[2]}, {"6", h[3]}, {"8", h[4]}, {"10", h[5]}, {">10", h[6]}};
  };
  json coefs = json::array();
  for (const auto& c : report.coefficients) {
    const auto summary = [](const SampleSummary& s) { return json{{"count", s.count}, {"mean", s.mean}, {"sd", s.sd}}; };
    coefs.push_back({{"context", c.context.symbols()},
                     {"target", c.target},
                     {"lag", c.lag},
                     {"covariate", c.covariate},
                     {"truth", c.truth},
                     {"all", summary(c.all)},
                     {"filtered", summary(c.filtered)}});
  }
  json runs = json::array();
  for (const auto& m : report.per_run)
    runs.push_back({{"bic", m.bic},
                    {"aic", m.aic},
                    {"loglik", m.loglik},
                    {"n_alpha", m.n_alpha},
                    {"n_beta", m.n_beta},
                    {"order_tree", m.order_tree},
                    {"order_covar", m.order_covar},
                    {"missing", m.missing},
                    {"extra", m.extra},
                    {"identical_tau", m.identical_tau},
                    {"identical_tau_theta", m.identical_tau_theta}});
  return {{"model", report.model},
          {"n", report.n},
          {"runs", report.runs},
          {"failures", report.failures},
          {"errors", report.errors},
          {"mean",
           {{"bic", report.bic},
            {"aic", report.aic},
            {"loglik", report.loglik},
            {"n_alpha", report.n_alpha},
            {"n_beta", report.n_beta},
            {"order_tree", report.order_tree},
            {"order_covar", report.order_covar},
            {"missing", report.missing},
            {"extra", report.extra},
            {"identical_tau", report.identical_tau},
            {"identical_tau_theta", report.identical_tau_theta}}},
          {"missing_histogram", hist(report.missing_histogram)},
          {"extra_histogram", hist(report.extra_histogram)},
          {"coefficients", std::move(coefs)},
          {"per_run", std::move(runs)}};
}

std::string monte_carlo_table(const MonteCarloReport& r) {
  std::ostringstream os;
  os << std::fixed;
  const auto row = [&os](const std::vector<std::string>& cells) {
    for (const auto& c : cells) os << std::setw(14) << c;
    os << '\n';
  };
  const auto num = [](double v, int precision) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(precision) << v;
    return s.str();
  };
  os << r.model << ", n = " << r.n << ", " << r.runs << " runs (" << r.failures << " failed)\n";
  row({"BIC", "AIC", "logLik", "No. alpha", "No. beta"});
  row({num(r.bic, 3), num(r.aic, 3), num(r.loglik, 4), num(r.n_alpha, 3), num(r.n_beta, 3)});
  row({"order tree", "order covar", "missing", "extra", "ident. tau", "ident. theta"});
  row({num(r.order_tree, 3), num(r.order_covar, 3), num(r.missing, 3), num(r.extra, 3), num(r.identical_tau, 3),
       num(r.identical_tau_theta, 3)});
  os << "missing histogram (0 2 4 6 8 10 >10):";
  for (int c : r.missing_histogram) os << ' ' << c;
  os << "\nextra histogram   (0 2 4 6 8 10 >10):";
  for (int c : r.extra_histogram) os << ' ' << c;
  os << '\n';
  if (!r.coefficients.empty()) {
    os << "coefficients (runs with exact support):\n";
    for (const auto& c : r.coefficients) {
      os << "  beta^" << c.context.str() << "_" << c.lag;
      if (c.covariate > 0 || c.target > 1) os << " (target " << c.target << ", covariate " << c.covariate + 1 << ")";
      os << "  true " << num(c.truth, 2) << "  mean " << num(c.all.mean, 3) << "  sd " << num(c.all.sd, 3) << "  n "
         << c.all.count << "  | converged-only mean " << num(c.filtered.mean, 3) << "  sd " << num(c.filtered.sd, 3)
         << "  n " << c.filtered.count << '\n';
    }
  }
  return os.str();
}

}  // namespace bvlmc
