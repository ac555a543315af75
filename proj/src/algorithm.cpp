#include "bvlmc/algorithm.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <map>
#include <optional>
#include <set>
#include <tuple>

#include "bvlmc/error.hpp"
#include "bvlmc/model_io.hpp"

namespace bvlmc {

void FitConfig::validate() const {
  if (s < 1) throw UsageError("s must be >= 1");
  if (!(gamma > 0.0 && gamma < 1.0)) throw UsageError("gamma must lie in (0, 1)");
  if (max_order_cap < 0) throw UsageError("max_order_cap must be >= 1 (or 0 for the default)");
}

int FitConfig::depth_cap(std::size_t n) const {
  const int log_cap = n >= 2 ? static_cast<int>(std::floor(std::log2(static_cast<double>(n)))) : 1;
  return max_order_cap > 0 ? std::min(max_order_cap, log_cap) : log_cap;
}

const char* to_string(TestKind kind) {
  switch (kind) {
    case TestKind::PastmostBeta:
      return "pastmost_beta";
    case TestKind::MergeSiblings:
      return "merge_siblings";
    case TestKind::SequentialBeta:
      return "sequential_beta";
  }
  return "unknown";
}

const char* to_string(TestAction action) {
  switch (action) {
    case TestAction::Shorten:
      return "shorten";
    case TestAction::Keep:
      return "keep";
    case TestAction::Merge:
      return "merge";
    case TestAction::NoMerge:
      return "no_merge";
  }
  return "unknown";
}

int FitReport::order_covar() const {
  int out = 0;
  for (const auto& u : tree.leaves())
    if (const auto& b = tree.block(u)) out = std::max(out, b->h);
  return out;
}

namespace {

struct LeafState {
  std::vector<std::size_t> times;
  double loglik = 0.0;
  FitStatus status = FitStatus::Converged;
};

// Holds the working tree plus the transition times and log-likelihood of
// every leaf. The full log-likelihood is the sum over leaves, so each test
// only refits the leaves it touches.
class Pruner {
 public:
  Pruner(const Dataset& data, const FitConfig& config, ContextTree tree, std::size_t horizon)
      : data_(data), config_(config), tree_(std::move(tree)), horizon_(horizon) {
    if (horizon_ < static_cast<std::size_t>(tree_.order())) horizon_ = static_cast<std::size_t>(tree_.order());
    for (const auto& u : tree_.leaves()) leaves_[u];
    for (std::size_t t = horizon_; t < data_.size(); ++t) leaves_[tree_.resolve(data_.states, t)].times.push_back(t);
  }

  // Fits every leaf with h equal to its depth.
  void fit_all_full() {
    for (auto& [u, state] : leaves_) {
      auto fitted = fit(u, state.times, static_cast<int>(u.size()));
      state.loglik = fitted.loglik;
      state.status = fitted.status;
      tree_.set_block(u, std::move(fitted.params));
    }
  }

  // Evaluates the blocks already attached to the tree.
  void evaluate_existing() {
    for (auto& [u, state] : leaves_) {
      const auto& block = tree_.block(u);
      if (!block) throw UsageError("leaf " + u.str() + " has no parameters");
      state.loglik = state.times.empty() ? 0.0 : design_log_likelihood(design(u, state.times, block->h), *block);
    }
  }

  // Tests H0: past-most covariate row of leaf u is zero. Returns whether
  // H0 was rejected.
  bool test_pastmost(const Context& u, TestKind kind, int pass_depth, double gamma, LrtResult* out = nullptr) {
    auto& state = leaves_.at(u);
    const ParamBlock& current = *tree_.block(u);
    if (current.h < 1) throw UsageError("leaf " + u.str() + " has no covariate lag to test");
    AuditRecord rec;
    rec.kind = kind;
    rec.pass_depth = pass_depth;
    rec.context = u;
    rec.gamma = gamma;

    const MleResult null = fit(u, state.times, current.h - 1);
    const int df = current.free_parameters() - null.params.free_parameters();
    bool usable = true;
    if (null.status == FitStatus::NotConverged) {
      usable = false;
      rec.note = "constrained fit did not converge; not rejecting";
    } else {
      try {
        rec.test = lrt(null.loglik, state.loglik, df);
        if (rec.test.clamped) rec.note = "negative deviance clamped to 0";
      } catch (const NestingViolation& e) {
        usable = false;
        rec.note = std::string("nesting violation (") + e.what() + "); not rejecting";
      }
    }
    if (!usable) rec.test = LrtResult{0.0, df, 1.0, false};

    const bool rejected = usable && !(rec.test.p_value > gamma);
    if (rejected) {
      rec.action = TestAction::Keep;
      rec.new_h = current.h;
    } else {
      rec.action = TestAction::Shorten;
      rec.new_h = null.params.h;
      state.loglik = null.loglik;
      state.status = null.status;
      tree_.set_block(u, null.params);
    }
    if (out) *out = rec.test;
    audit_.push_back(std::move(rec));
    return rejected;
  }

  // Tests replacing the children of `parent` by `parent`. Returns whether
  // the merge happened.
  bool test_merge(const Context& parent, int pass_depth, double gamma, LrtResult* out = nullptr) {
    const auto kids = tree_.children(parent);
    if (kids.empty()) throw ChildrenNotLeaves(parent.str() + " is a leaf");
    std::vector<std::size_t> times;
    double alt_loglik = 0.0;
    int alt_params = 0;
    for (const auto& c : kids) {
      if (!tree_.is_leaf(c)) throw ChildrenNotLeaves("child " + c.str() + " of " + parent.str() + " has children");
      const auto& state = leaves_.at(c);
      std::vector<std::size_t> merged;
      std::merge(times.begin(), times.end(), state.times.begin(), state.times.end(), std::back_inserter(merged));
      times = std::move(merged);
      alt_loglik += state.loglik;
      alt_params += tree_.block(c)->free_parameters();
    }

    AuditRecord rec;
    rec.kind = TestKind::MergeSiblings;
    rec.pass_depth = pass_depth;
    rec.context = parent;
    rec.gamma = gamma;

    const int parent_h = data_.dim() > 0 ? static_cast<int>(parent.size()) : 0;
    const MleResult null = fit(parent, times, parent_h);
    const int df = alt_params - null.params.free_parameters();
    bool usable = df >= 1;
    if (!usable) {
      rec.note = "alternative has no more parameters than the merged parent; not testable";
      rec.test = LrtResult{0.0, 1, 0.0, false};
    } else if (null.status == FitStatus::NotConverged) {
      usable = false;
      rec.note = "merged fit did not converge; treating as non-rejection";

      rec.test = LrtResult{0.0, df, 1.0, false};
    } else {
      try {
        rec.test = lrt(null.loglik, alt_loglik, df);
        if (rec.test.clamped) rec.note = "negative deviance clamped to 0";
      } catch (const NestingViolation& e) {
        rec.note = std::string("nesting violation (") + e.what() + "); treating as non-rejection";
        rec.test = LrtResult{0.0, df, 1.0, false};
      }
    }

    const bool merge = df >= 1 && rec.test.p_value >= gamma;
    if (merge) {
      rec.action = TestAction::Merge;
      rec.new_h = null.params.h;
      for (const auto& c : kids) leaves_.erase(c);
      tree_.collapse(parent);
      tree_.set_block(parent, null.params);
      auto& state = leaves_[parent];
      state.times = std::move(times);
      state.loglik = null.loglik;
      state.status = null.status;
    } else {
      rec.action = TestAction::NoMerge;
      rec.new_h = null.params.h;
    }
    if (out) *out = rec.test;
    audit_.push_back(std::move(rec));
    return merge;
  }

  void sequential(const Context& u, int pass_depth, double gamma) {
    while (tree_.block(u)->h > 0)
      if (test_pastmost(u, TestKind::SequentialBeta, pass_depth, gamma)) break;
  }

  // Past-most tests, sibling merges and sequential shortening, one depth
  // level per pass.
  void run() {
    const int r = tree_.order();
    for (int depth = r; depth >= 1; --depth) {
      std::vector<Context> level;
      for (const auto& u : tree_.leaves())
        if (static_cast<int>(u.size()) == depth) level.push_back(u);
      if (level.empty()) continue;

      double gamma = config_.gamma;
      if (config_.bonferroni) gamma /= static_cast<double>(level.size());

      std::set<Context> rejected;
      for (const auto& u : level)
        if (tree_.block(u)->h >= 1 && test_pastmost(u, TestKind::PastmostBeta, depth, gamma)) rejected.insert(u);

      std::set<Context> parents;
      for (const auto& u : level) parents.insert(u.parent());
      for (const auto& parent : parents) {
        const auto kids = tree_.children(parent);
        const bool all_leaves =
            std::all_of(kids.begin(), kids.end(), [&](const Context& c) { return tree_.is_leaf(c); });
        const bool none_rejected =
            std::none_of(kids.begin(), kids.end(), [&](const Context& c) { return rejected.count(c) > 0; });
        if (all_leaves && none_rejected && test_merge(parent, depth, gamma)) continue;
        for (const auto& c : kids)
          if (tree_.is_leaf(c) && static_cast<int>(c.size()) == depth && !rejected.count(c)) sequential(c, depth, gamma);
      }
    }
  }

  const ContextTree& tree() const { return tree_; }
  ContextTree take_tree() { return std::move(tree_); }
  std::vector<AuditRecord>& audit() { return audit_; }
  std::size_t horizon() const { return horizon_; }
  const std::map<Context, LeafState>& leaf_states() const { return leaves_; }

 private:
  LeafDesign design(const Context& u, const std::vector<std::size_t>& times, int h) const {
    return design_from_times(data_, u, times, h);
  }

  MleResult fit(const Context& u, const std::vector<std::size_t>& times, int h) const {
    if (data_.dim() == 0) h = 0;
    if (times.empty()) {
      MleResult empty;
      empty.params = ParamBlock(data_.p, data_.dim(), h);
      empty.status = FitStatus::Converged;
      return empty;
    }
    return fit_leaf(design(u, times, h), std::nullopt, config_.newton);
  }

  const Dataset& data_;
  const FitConfig& config_;
  ContextTree tree_;
  std::size_t horizon_;
  std::map<Context, LeafState> leaves_;
  std::vector<AuditRecord> audit_;
};

ContextTree maximal_structure(const Dataset& data, const FitConfig& config) {
  const int cap = config.depth_cap(data.size());
  const int d = data.dim();
  ContextTree tree(data.p, d);
  std::vector<Context> frontier{Context{}};
  while (!frontier.empty()) {
    std::vector<Context> next;
    for (const auto& u : frontier) {
      const int k = static_cast<int>(u.size()) + 1;
      if (k > cap) continue;
      const auto threshold = static_cast<std::size_t>(config.s) * static_cast<std::size_t>(1 + d * k);
      bool admissible = true;
      for (int w = 0; w < data.p && admissible; ++w) admissible = count_occurrences(data, u.child(w)) >= threshold;
      if (!admissible) continue;
      tree.split(u);
      for (int w = 0; w < data.p; ++w) next.push_back(u.child(w));
    }
    frontier = std::move(next);
  }
  if (tree.is_leaf(Context{}))
    throw DataTooShort("no depth-1 context reaches " + std::to_string(config.s * (1 + d)) +
                       " occurrences; the series is too short for s = " + std::to_string(config.s));
  return tree;
}

std::size_t horizon_for(const Dataset& data, const FitConfig& config) {
  return static_cast<std::size_t>(config.depth_cap(data.size()));
}

void check_inputs(const Dataset& data, const FitConfig& config) {
  data.validate();
  config.validate();
}

}  // namespace

ContextTree build_maximal_tree(const Dataset& data, const FitConfig& config) {
  check_inputs(data, config);
  Pruner pruner(data, config, maximal_structure(data, config), horizon_for(data, config));
  pruner.fit_all_full();
  return pruner.take_tree();
}

TestOutcome test_pastmost_beta(const ContextTree& tree, const Context& u, const Dataset& data,
                               const FitConfig& config) {
  check_inputs(data, config);
  if (!tree.is_leaf(u)) throw UsageError(u.str() + " is not a leaf");
  Pruner pruner(data, config, tree, horizon_for(data, config));
  pruner.evaluate_existing();
  TestOutcome out{{}, tree, false};
  out.pruned = !pruner.test_pastmost(u, TestKind::PastmostBeta, static_cast<int>(u.size()), config.gamma, &out.test);
  out.tree = pruner.take_tree();
  return out;
}

TestOutcome merge_siblings_test(const ContextTree& tree, const Context& parent, const Dataset& data,
                                const FitConfig& config) {
  check_inputs(data, config);
  Pruner pruner(data, config, tree, horizon_for(data, config));
  pruner.evaluate_existing();
  TestOutcome out{{}, tree, false};
  out.pruned = pruner.test_merge(parent, static_cast<int>(parent.size()) + 1, config.gamma, &out.test);
  out.tree = pruner.take_tree();
  return out;
}

ContextTree sequential_beta_prune(const ContextTree& tree, const Context& u, const Dataset& data,
                                  const FitConfig& config) {
  check_inputs(data, config);
  if (!tree.is_leaf(u)) throw UsageError(u.str() + " is not a leaf");
  Pruner pruner(data, config, tree, horizon_for(data, config));
  pruner.evaluate_existing();
  pruner.sequential(u, static_cast<int>(u.size()), config.gamma);
  return pruner.take_tree();
}

FitReport fit(const Dataset& data, const FitConfig& config) {
  check_inputs(data, config);
  Pruner pruner(data, config, maximal_structure(data, config), horizon_for(data, config));
  pruner.fit_all_full();

  FitReport report;
  report.config = config;
  report.maximal_tree = pruner.tree();
  pruner.run();

  report.horizon = pruner.horizon();
  report.n_eff = data.size() - report.horizon;
  for (const auto& [u, state] : pruner.leaf_states()) {
    const auto& block = *pruner.tree().block(u);
    report.loglik += state.loglik;
    report.n_beta += block.beta_count();
    report.leaves.push_back({u, state.times.size(), block.h, state.loglik, state.status});
  }
  report.n_alpha = static_cast<int>(report.leaves.size());
  report.audit = std::move(pruner.audit());
  report.tree = pruner.take_tree();

  int penalty = report.n_beta;
  if (config.conventional_criteria) penalty += report.n_alpha * (data.p - 1);
  report.aic = -2.0 * report.loglik + 2.0 * penalty;
  report.bic = -2.0 * report.loglik + penalty * std::log(static_cast<double>(report.n_eff));
  return report;
}

const char* to_string(TuningCriterion criterion) {
  return criterion == TuningCriterion::ConventionalBic ? "conventional" : "beta";
}

TuningCriterion tuning_criterion_from_string(const std::string& name) {
  if (name == "conventional") return TuningCriterion::ConventionalBic;
  if (name == "beta") return TuningCriterion::BetaBic;
  throw UsageError("unknown tuning criterion \"" + name + "\" (expected conventional or beta)");
}

double tuning_score(const FitReport& report, TuningCriterion criterion) {
  if (criterion == TuningCriterion::BetaBic) {
    if (!report.config.conventional_criteria) return report.bic;
    return -2.0 * report.loglik + report.n_beta * std::log(static_cast<double>(report.n_eff));
  }
  const int k = report.n_beta + report.n_alpha * (report.tree.p() - 1);
  return -2.0 * report.loglik + k * std::log(static_cast<double>(report.n_eff));
}

TuningResult select_tuning(const Dataset& data, const std::vector<int>& s_grid, const std::vector<double>& gamma_grid,
                           const FitConfig& base, TuningCriterion criterion) {
  if (s_grid.empty() || gamma_grid.empty()) throw UsageError("tuning grids must be nonempty");
  std::optional<TuningResult> best;
  std::string last_error;
  for (int s : s_grid) {
    for (double gamma : gamma_grid) {
      FitConfig config = base;
      config.s = s;
      config.gamma = gamma;
      try {
        FitReport report = fit(data, config);
        const auto key = [criterion](const TuningResult& t) {
          return std::make_tuple(tuning_score(t.report, criterion), t.report.tree.nodes().size(), t.config.gamma,
                                 t.config.s);
        };
        TuningResult candidate{config, std::move(report)};
        if (!best || key(candidate) < key(*best)) best = std::move(candidate);
      } catch (const Error& e) {
        last_error = e.what();
      }
    }
  }
  if (!best) throw AllFitsFailed("every tuning grid point failed: " + last_error);
  return std::move(*best);
}

ContextTree replay_audit(const ContextTree& maximal_tree, const std::vector<AuditRecord>& audit) {
  ContextTree tree = maximal_tree;
  const int p = tree.p();
  const int d = tree.d();
  for (const auto& u : tree.leaves()) {
    const int h = tree.block(u) ? tree.block(u)->h : static_cast<int>(u.size());
    tree.set_block(u, ParamBlock(p, d, h));
  }
  for (const auto& rec : audit) {
    if (rec.action == TestAction::Shorten) {
      tree.set_block(rec.context, ParamBlock(p, d, rec.new_h));
    } else if (rec.action == TestAction::Merge) {
      tree.collapse(rec.context);
      tree.set_block(rec.context, ParamBlock(p, d, rec.new_h));
    }
  }
  return tree;
}

bool same_support(const ContextTree& a, const ContextTree& b) {
  if (!a.same_structure(b)) return false;
  for (const auto& u : a.leaves()) {
    const auto& ba = a.block(u);
    const auto& bb = b.block(u);
    if (!ba || !bb || ba->h != bb->h) return false;
  }
  return true;
}

nlohmann::json report_to_json(const FitReport& report) {
  using nlohmann::json;
  json j = model_to_json(report.tree);
  j["criteria"] = {
      {"loglik", report.loglik},
      {"aic", report.aic},
      {"bic", report.bic},
      {"n_alpha", report.n_alpha},
      {"n_beta", report.n_beta},
      {"n_eff", report.n_eff},
      {"horizon", report.horizon},
      {"order_tree", report.order_tree()},
      {"order_covar", report.order_covar()},
      {"max_order", report.maximal_tree.order()},
      {"s", report.config.s},
      {"gamma", report.config.gamma},
      {"bonferroni", report.config.bonferroni},
      {"penalty", report.config.conventional_criteria ? "alpha+beta" : "beta"},
  };
  json audit = json::array();
  for (const auto& rec : report.audit) {
    json entry = {{"test", to_string(rec.kind)},
                  {"pass", rec.pass_depth},
                  {"context", rec.context.symbols()},
                  {"lambda", rec.test.lambda},
                  {"df", rec.test.df},
                  {"p_value", rec.test.p_value},
                  {"gamma", rec.gamma},
                  {"action", to_string(rec.action)},
                  {"new_h", rec.new_h}};
    if (!rec.note.empty()) entry["note"] = rec.note;
    audit.push_back(std::move(entry));
  }
  j["audit"] = std::move(audit);
  json diag = json::array();
  for (const auto& leaf : report.leaves)
    diag.push_back({{"context", leaf.context.symbols()},
                    {"observations", leaf.observations},
                    {"h", leaf.h},
                    {"loglik", leaf.loglik},
                    {"status", to_string(leaf.status)}});
  j["diagnostics"] = std::move(diag);
  return j;
}

}  // namespace bvlmc
