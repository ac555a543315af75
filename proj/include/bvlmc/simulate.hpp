#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "bvlmc/algorithm.hpp"
#include "bvlmc/core.hpp"

namespace bvlmc {

/// A data-generating model: a fully parameterized tree. Covariates are
/// drawn i.i.d. standard normal.
struct ModelSpec {
  std::string name;
  ContextTree tree{2, 0};
};

/// "model1", "model2" or "model3".
ModelSpec builtin_model(std::string_view name);

inline constexpr std::size_t kBurnIn = 1000;

/// Simulates n transitions. The chain starts from an all-zero history and
/// discards `burn_in` transitions first. Pure function of its arguments.
Dataset generate(const ModelSpec& spec, std::size_t n, std::uint64_t seed, std::size_t burn_in = kBurnIn);

/// Recovery metrics of one fit against the truth. Missing/extra count
/// tree nodes (not only leaves) in the symmetric difference.
struct EvalMetrics {
  double bic = 0.0;
  double aic = 0.0;
  double loglik = 0.0;
  int n_alpha = 0;
  int n_beta = 0;
  int order_tree = 0;
  int order_covar = 0;
  int missing = 0;
  int extra = 0;
  bool identical_tau = false;
  bool identical_tau_theta = false;
};

EvalMetrics compare_trees(const ModelSpec& truth, const FitReport& fitted);

struct MonteCarloOptions {
  std::size_t n = 1000;
  int runs = 100;
  std::uint64_t base_seed = 1;
  /// Per-run BIC tuning over the grids; otherwise `config` is used as is.
  bool tune = true;
  FitConfig config;
  std::vector<int> s_grid = kDefaultSGrid;
  std::vector<double> gamma_grid = kDefaultGammaGrid;
  TuningCriterion criterion = TuningCriterion::ConventionalBic;
  /// 0 picks std::thread::hardware_concurrency().
  unsigned threads = 0;
};

struct SampleSummary {
  int count = 0;
  double mean = 0.0;
  double sd = 0.0;
};

/// One true nonzero coefficient, summarized over the runs in which its
/// context was recovered as a leaf with exactly the true beta length.
struct CoefficientSummary {
  Context context;
  int target = 1;
  int lag = 1;
  int covariate = 0;
  double truth = 0.0;
  SampleSummary all;
  /// Excludes runs whose leaf fit hit separation or did not converge.
  SampleSummary filtered;
};

struct MonteCarloReport {
  std::string model;
  std::size_t n = 0;
  int runs = 0;
  int failures = 0;
  std::vector<EvalMetrics> per_run;
  std::vector<std::string> errors;

  // Means over successful runs.
  double bic = 0.0;
  double aic = 0.0;
  double loglik = 0.0;
  double n_alpha = 0.0;
  double n_beta = 0.0;
  double order_tree = 0.0;
  double order_covar = 0.0;
  double missing = 0.0;
  double extra = 0.0;
  double identical_tau = 0.0;
  double identical_tau_theta = 0.0;

  /// Buckets 0, 2, 4, 6, 8, 10 and overflow.
  std::array<int, 7> missing_histogram{};
  std::array<int, 7> extra_histogram{};

  std::vector<CoefficientSummary> coefficients;

  const CoefficientSummary* coefficient(const Context& u, int lag, int covariate = 0, int target = 1) const;
};

/// Runs `runs` independent simulate-and-fit replicates with seeds
/// base_seed + run index.
MonteCarloReport monte_carlo(const ModelSpec& spec, const MonteCarloOptions& options);

nlohmann::json monte_carlo_to_json(const MonteCarloReport& report);
/// Aligned two-block text table in the layout of the usual results table.
std::string monte_carlo_table(const MonteCarloReport& report);

}  // namespace bvlmc
