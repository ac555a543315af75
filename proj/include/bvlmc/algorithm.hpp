#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "bvlmc/core.hpp"
#include "bvlmc/glm.hpp"
#include "bvlmc/stats.hpp"

namespace bvlmc {

struct FitConfig {
  /// Minimum observations per parameter when growing the maximal tree.
  int s = 2;
  /// Per-test significance level; a test with p-value above it prunes.
  double gamma = 1e-3;
  /// Depth cap for the maximal tree; 0 means floor(log2 n).
  int max_order_cap = 0;
  /// Divide gamma by the number of leaves at the depth of each pass.
  bool bonferroni = false;
  /// Count intercepts in the AIC/BIC penalty (default counts only betas).
  bool conventional_criteria = false;
  NewtonOptions newton;

  void validate() const;
  /// Effective depth cap for a series of length n; also the conditioning
  /// horizon shared by every fit on that series.
  int depth_cap(std::size_t n) const;
};

enum class TestKind { PastmostBeta, MergeSiblings, SequentialBeta };
enum class TestAction { Shorten, Keep, Merge, NoMerge };

const char* to_string(TestKind kind);
const char* to_string(TestAction action);

/// One hypothesis test performed while pruning.
struct AuditRecord {
  TestKind kind = TestKind::PastmostBeta;
  int pass_depth = 0;
  /// Tested leaf, or the parent for a merge test.
  Context context;
  /// Beta length after the action (parent's length for merges).
  int new_h = 0;
  LrtResult test;
  double gamma = 0.0;
  TestAction action = TestAction::Keep;
  std::string note;
};

struct LeafDiagnostics {
  Context context;
  std::size_t observations = 0;
  int h = 0;
  double loglik = 0.0;
  FitStatus status = FitStatus::Converged;
};

struct FitReport {
  ContextTree tree{2, 0};
  /// Maximal tree with its fitted parameters.
  ContextTree maximal_tree{2, 0};
  FitConfig config;
  std::size_t horizon = 0;
  std::size_t n_eff = 0;
  double loglik = 0.0;
  double aic = 0.0;
  double bic = 0.0;
  int n_alpha = 0;
  int n_beta = 0;
  std::vector<LeafDiagnostics> leaves;
  std::vector<AuditRecord> audit;

  int order_tree() const { return tree.order(); }
  int order_covar() const;
};

/// Outcome of a single pruning test applied to a fully parameterized tree.
struct TestOutcome {
  LrtResult test;
  ContextTree tree;
  bool pruned = false;
};

/// Deepest count-admissible tree, every leaf fitted with h = depth.
ContextTree build_maximal_tree(const Dataset& data, const FitConfig& config);

/// Tests whether leaf u's past-most covariate row can be zeroed.
TestOutcome test_pastmost_beta(const ContextTree& tree, const Context& u, const Dataset& data,
                               const FitConfig& config);

/// Tests replacing all children of `parent` by the parent itself.
TestOutcome merge_siblings_test(const ContextTree& tree, const Context& parent, const Dataset& data,
                                const FitConfig& config);

/// Shortens u's beta from the past-most lag until a test rejects.
ContextTree sequential_beta_prune(const ContextTree& tree, const Context& u, const Dataset& data,
                                  const FitConfig& config);

/// Maximal tree, then one pruning pass per depth from the deepest level up.
FitReport fit(const Dataset& data, const FitConfig& config);

struct TuningResult {
  FitConfig config;
  FitReport report;
};

inline const std::vector<int> kDefaultSGrid = {2, 5, 10};
inline const std::vector<double> kDefaultGammaGrid = {1e-5, 1e-4, 1e-3, 1e-2};

/// Score used to rank grid points. ConventionalBic counts every free
/// parameter (intercepts included); BetaBic is the reported beta-only BIC,
/// which leaves intercept-only splits unpenalized.
enum class TuningCriterion { ConventionalBic, BetaBic };

const char* to_string(TuningCriterion criterion);
TuningCriterion tuning_criterion_from_string(const std::string& name);
double tuning_score(const FitReport& report, TuningCriterion criterion);

/// Fits every (s, gamma) pair and keeps the minimum-score fit. Ties go to
/// the smaller tree, then the smaller gamma, then the smaller s.
TuningResult select_tuning(const Dataset& data, const std::vector<int>& s_grid = kDefaultSGrid,
                           const std::vector<double>& gamma_grid = kDefaultGammaGrid, const FitConfig& base = {},
                           TuningCriterion criterion = TuningCriterion::ConventionalBic);

/// Re-applies the recorded actions to the maximal tree. Leaves carry
/// zero-valued blocks of the recorded lengths.
ContextTree replay_audit(const ContextTree& maximal_tree, const std::vector<AuditRecord>& audit);

/// Same structure and same beta length at every leaf.
bool same_support(const ContextTree& a, const ContextTree& b);

nlohmann::json report_to_json(const FitReport& report);

}  // namespace bvlmc
