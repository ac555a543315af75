#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "bvlmc/error.hpp"
#include "bvlmc/glm.hpp"
#include "bvlmc/simulate.hpp"
#include "oracles.hpp"

using namespace bvlmc;
using doctest::Approx;

namespace {

FitReport report_for(ContextTree tree) {
  FitReport r;
  r.tree = std::move(tree);
  return r;
}

MonteCarloOptions fixed_options(std::size_t n, int runs, double gamma = 1e-3) {
  MonteCarloOptions o;
  o.n = n;
  o.runs = runs;
  o.tune = false;
  o.config.gamma = gamma;
  o.threads = 1;
  return o;
}

}  // namespace

TEST_CASE("generate is a pure function of its arguments") {
  const ModelSpec spec = builtin_model("model1");
  const Dataset a = generate(spec, 500, 42);
  const Dataset b = generate(spec, 500, 42);
  CHECK(a.states == b.states);
  CHECK(a.covariates == b.covariates);
  CHECK(a.size() == 500);
  CHECK(a.dim() == 1);
  CHECK(generate(spec, 500, 43).states != a.states);
}

TEST_CASE("root-only fair coin") {
  ContextTree root(2, 1);
  root.set_block(Context{}, ParamBlock(2, 1, 0));
  const std::size_t n = 20000;
  const Dataset data = generate({"coin", root}, n, 3);
  double mean = 0.0;
  for (int y : data.states) mean += y;
  mean /= static_cast<double>(n);
  CHECK(std::abs(mean - 0.5) <= 3.0 / (2.0 * std::sqrt(static_cast<double>(n))));
  CHECK(std::abs(data.covariates.mean()) <= 4.0 / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("built-in models") {
  const auto m1 = builtin_model("model1").tree;
  const auto& b0111 = *m1.block(Context::parse("0111"));
  CHECK(b0111.alpha(0) == 2.0);
  CHECK(b0111.h == 2);
  CHECK(b0111.beta(0, 0) == 1.5);
  CHECK(b0111.beta(0, 1) == 2.0);
  CHECK(m1.block(Context::parse("0110"))->h == 4);
  CHECK(m1.block(Context::parse("10"))->h == 0);
  CHECK(m1.leaves().size() == 6);

  const auto m2 = builtin_model("model2").tree;
  const auto& b10 = *m2.block(Context::parse("10"));
  CHECK(b10.alpha(0) == -0.2);
  CHECK(b10.h == 1);
  CHECK(b10.beta(0, 0) == -1.2);
  CHECK(m2.leaves().size() == 5);

  const auto m3 = builtin_model("model3").tree;
  CHECK(m3.block(Context::parse("000"))->alpha(0) == 0.5);
  CHECK(m3.block(Context::parse("000"))->h == 0);
  CHECK(m3.same_structure(m2));
  CHECK_THROWS_AS(builtin_model("model4"), UnknownModel);
}

TEST_CASE("simulated Model 2 follows the logistic curve at context 01") {
  const ModelSpec spec = builtin_model("model2");
  const Context u = Context::parse("01");
  const ParamBlock& block = *spec.tree.block(u);
  REQUIRE(block.h == 2);
  CHECK(block.beta(0, 0) == -1.0);
  CHECK(block.beta(0, 1) == -2.0);

  const Dataset data = generate(spec, 100000, 2024);
  // Bin the transitions out of "01" by the model's probability, then
  // compare observed and expected counts of state 1 per bin.
  constexpr int kBins = 10;
  std::array<double, kBins> expected{}, observed{}, variance{};
  std::array<int, kBins> count{};
  for (std::size_t t = 4; t < data.size(); ++t) {
    if (oracle::brute_leaf(spec.tree, data.states, t) != "01") continue;
    const double prob = oracle::brute_probability(block, data.covariates, t, 1);
    const int bin = std::min(kBins - 1, static_cast<int>(prob * kBins));
    expected[bin] += prob;
    variance[bin] += prob * (1.0 - prob);
    observed[bin] += data.states[t];
    ++count[bin];
  }
  int checked = 0;
  for (int b = 0; b < kBins; ++b) {
    if (count[b] < 200) continue;
    ++checked;
    CHECK(std::abs(observed[b] - expected[b]) <= 4.0 * std::sqrt(variance[b]));
  }
  CHECK(checked >= 6);
}

TEST_CASE("compare_trees") {
  const ModelSpec m2 = builtin_model("model2");
  const EvalMetrics same = compare_trees(m2, report_for(m2.tree));
  CHECK(same.missing == 0);
  CHECK(same.extra == 0);
  CHECK(same.identical_tau);
  CHECK(same.identical_tau_theta);

  ContextTree merged = merge_leaves(m2.tree, Context::parse("00"));
  merged.set_block(Context::parse("00"), ParamBlock(2, 1, 2));
  const EvalMetrics m = compare_trees(m2, report_for(merged));
  CHECK(m.missing == 2);
  CHECK(m.extra == 0);
  CHECK_FALSE(m.identical_tau);
  CHECK_FALSE(m.identical_tau_theta);

  ContextTree split = m2.tree;
  split.split(Context::parse("11"));
  for (int w = 0; w < 2; ++w) split.set_block(Context::parse("11").child(w), ParamBlock(2, 1, 0));
  const EvalMetrics e = compare_trees(m2, report_for(split));
  CHECK(e.missing == 0);
  CHECK(e.extra == 2);

  ContextTree shorter = m2.tree;
  shorter.set_block(Context::parse("10"), ParamBlock(2, 1, 0));
  const EvalMetrics s = compare_trees(m2, report_for(shorter));
  CHECK(s.identical_tau);
  CHECK_FALSE(s.identical_tau_theta);

  for (const char* name : {"model1", "model3"}) {
    const ModelSpec spec = builtin_model(name);
    const EvalMetrics fixed = compare_trees(spec, report_for(spec.tree));
    CHECK(fixed.identical_tau_theta);
    CHECK(fixed.missing + fixed.extra == 0);
  }

  ContextTree ternary(3, 1);
  ternary.set_block(Context{}, ParamBlock(3, 1, 0));
  CHECK_THROWS_AS(compare_trees(m2, report_for(ternary)), AlphabetMismatch);
}

TEST_CASE("a single run is its own aggregate") {
  const ModelSpec spec = builtin_model("model1");
  const MonteCarloOptions options = fixed_options(1000, 1);
  const MonteCarloReport report = monte_carlo(spec, options);
  REQUIRE(report.failures == 0);
  const EvalMetrics direct = compare_trees(spec, fit(generate(spec, 1000, options.base_seed), options.config));
  CHECK(report.per_run.at(0).bic == direct.bic);
  CHECK(report.bic == direct.bic);
  CHECK(report.n_beta == direct.n_beta);
  CHECK(report.missing == direct.missing);
  CHECK(report.identical_tau == (direct.identical_tau ? 1.0 : 0.0));
}

TEST_CASE("aggregation is independent of the thread count") {
  const ModelSpec spec = builtin_model("model2");
  MonteCarloOptions one = fixed_options(600, 12);
  MonteCarloOptions many = one;
  many.threads = 4;
  const MonteCarloReport a = monte_carlo(spec, one);
  const MonteCarloReport b = monte_carlo(spec, many);
  REQUIRE(a.per_run.size() == b.per_run.size());
  for (std::size_t i = 0; i < a.per_run.size(); ++i) {
    CHECK(a.per_run[i].bic == b.per_run[i].bic);
    CHECK(a.per_run[i].missing == b.per_run[i].missing);
  }
  CHECK(a.identical_tau == b.identical_tau);

  int total = 0;
  for (int c : a.missing_histogram) total += c;
  CHECK(total == a.runs - a.failures);
  for (const auto& run : a.per_run) {
    CHECK(run.identical_tau == (run.missing == 0 && run.extra == 0));
    CHECK((!run.identical_tau_theta || run.identical_tau));
  }

  const auto j = monte_carlo_to_json(a);
  CHECK(j.at("runs") == 12);
  CHECK(monte_carlo_table(a).find("ident. tau") != std::string::npos);
}

TEST_CASE("failed runs are counted, not thrown") {
  const MonteCarloReport r = monte_carlo(builtin_model("model1"), fixed_options(3, 2));
  CHECK(r.failures == 2);
  CHECK(r.errors.size() == 2);
}

TEST_CASE("Model 3 beta count shrinks as gamma shrinks") {
  const ModelSpec spec = builtin_model("model3");
  double previous = std::numeric_limits<double>::infinity();
  for (auto it = kDefaultGammaGrid.rbegin(); it != kDefaultGammaGrid.rend(); ++it) {
    const MonteCarloReport r = monte_carlo(spec, fixed_options(1000, 100, *it));
    CHECK(r.n_beta <= previous);
    previous = r.n_beta;
  }
}

TEST_CASE("recovery does not degrade with more data") {
  for (const char* name : {"model1", "model2"}) {
    MonteCarloOptions small;
    small.n = 1000;
    small.runs = 100;
    MonteCarloOptions large = small;
    large.n = 2000;
    const double a = monte_carlo(builtin_model(name), small).identical_tau;
    const double b = monte_carlo(builtin_model(name), large).identical_tau;
    MESSAGE(std::string(name) << ": identical tau " << a << " at n=1000, " << b << " at n=2000");
    CHECK(b >= a - 0.03);
  }
}
