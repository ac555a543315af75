#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "bvlmc/core.hpp"

namespace bvlmc {

/// Regression rows for the transitions governed by one context.
///
/// Row i models the transition into time times[i]; its regressors are
/// [1, x_{t-1,1..d}, ..., x_{t-h,1..d}].
struct LeafDesign {
  Context context;
  int p = 2;
  int d = 0;
  int h = 0;
  std::vector<std::size_t> times;
  std::vector<int> response;
  Eigen::MatrixXd regressors;

  std::size_t rows() const { return response.size(); }
  int width() const { return 1 + h * d; }
};

enum class FitStatus { Converged, SeparationDetected, NotConverged };

const char* to_string(FitStatus status);

struct MleResult {
  ParamBlock params;
  double loglik = 0.0;
  int iterations = 0;
  FitStatus status = FitStatus::NotConverged;
  double gradient_norm = 0.0;

  bool converged() const { return status == FitStatus::Converged; }
  bool separation() const { return status == FitStatus::SeparationDetected; }
};

struct NewtonOptions {
  double gradient_tolerance = 1e-8;
  int max_iterations = 100;
  int max_halvings = 30;
  double separation_bound = 30.0;
  double ridge = 1e-8;
};

/// Probability of each target state given the context's block and the most
/// recent covariate rows (row 0 = lag 1). Needs at least h rows.
Eigen::VectorXd transition_probabilities(const ParamBlock& block, const Eigen::Ref<const Eigen::MatrixXd>& recent);
double transition_probability(const ParamBlock& block, const Eigen::Ref<const Eigen::MatrixXd>& recent, int target);
/// Log-probabilities computed with log-sum-exp.
Eigen::VectorXd log_transition_probabilities(const ParamBlock& block, const Eigen::Ref<const Eigen::MatrixXd>& recent);

/// The h most recent covariate rows before time t, most recent first.
Eigen::MatrixXd recent_covariates(const Dataset& data, std::size_t t, int h);

/// Design for the given transition times, with h lags of covariates.
LeafDesign design_from_times(const Dataset& data, const Context& u, std::span<const std::size_t> times, int h);

/// Design for every t in [horizon, n) whose history resolves to leaf u.
LeafDesign build_design(const Dataset& data, const ContextTree& tree, const Context& u, int h, std::size_t horizon);
/// Same, conditioning on the first tree.order() observations.
LeafDesign build_design(const Dataset& data, const ContextTree& tree, const Context& u, int h);

/// Log-likelihood of the transitions into [horizon, n), conditional on the
/// states before `horizon`.
double log_likelihood(const ContextTree& tree, const Dataset& data, std::size_t horizon);
double log_likelihood(const ContextTree& tree, const Dataset& data);

/// Per-design pieces, parameterized by the block's flattened vector.
double design_log_likelihood(const LeafDesign& design, const ParamBlock& block);
Eigen::VectorXd gradient(const LeafDesign& design, const ParamBlock& block);
/// Hessian of the log-likelihood (negative observed information).
Eigen::MatrixXd hessian(const LeafDesign& design, const ParamBlock& block);

/// Newton-Raphson MLE with step-halving. `lags` restricts the fit to the
/// first `lags` covariate lags (the rest fixed at zero); defaults to design.h.
MleResult fit_leaf(const LeafDesign& design, std::optional<int> lags = std::nullopt, const NewtonOptions& options = {});

}  // namespace bvlmc
