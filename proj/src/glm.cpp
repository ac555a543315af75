#include "bvlmc/glm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "bvlmc/error.hpp"

namespace bvlmc {

const char* to_string(FitStatus status) {
  switch (status) {
    case FitStatus::Converged:
      return "converged";
    case FitStatus::SeparationDetected:
      return "separation";
    case FitStatus::NotConverged:
      return "not_converged";
  }
  return "unknown";
}

namespace {

// Linear predictors for the non-baseline states.
Eigen::VectorXd linear_predictors(const ParamBlock& block, const Eigen::Ref<const Eigen::MatrixXd>& recent) {
  if (recent.rows() < block.h)
    throw LagMismatch("need " + std::to_string(block.h) + " covariate rows, got " + std::to_string(recent.rows()));
  if (block.h > 0 && recent.cols() != block.d)
    throw LagMismatch("need " + std::to_string(block.d) + " covariate columns, got " + std::to_string(recent.cols()));
  Eigen::VectorXd eta = block.alpha;
  for (int lag = 0; lag < block.h; ++lag)
    eta += block.beta.middleCols(lag * block.d, block.d) * recent.row(lag).transpose();
  return eta;
}

// log(1 + sum_k exp(eta_k))
double log_normalizer(const Eigen::Ref<const Eigen::VectorXd>& eta) {
  const double m = std::max(0.0, eta.size() ? eta.maxCoeff() : 0.0);
  return m + std::log(std::exp(-m) + (eta.array() - m).exp().sum());
}

struct Evaluation {
  double loglik = 0.0;
  Eigen::VectorXd grad;
  Eigen::MatrixXd hess;
};

// theta is laid out per non-baseline state: [alpha_k, beta_k row], q wide.
Evaluation evaluate(const LeafDesign& design, int q, const Eigen::VectorXd& theta, bool derivatives) {
  const int K = design.p - 1;
  const auto m = static_cast<Eigen::Index>(design.rows());
  const auto X = design.regressors.leftCols(q);
  const Eigen::Map<const Eigen::MatrixXd> coef(theta.data(), q, K);

  Eigen::MatrixXd eta = X * coef;  // m x K
  Eigen::MatrixXd prob(m, K);
  Evaluation out;
  for (Eigen::Index i = 0; i < m; ++i) {
    const double lse = log_normalizer(eta.row(i).transpose());
    const int y = design.response[static_cast<std::size_t>(i)];
    out.loglik += (y > 0 ? eta(i, y - 1) : 0.0) - lse;
    prob.row(i) = (eta.row(i).array() - lse).exp();
  }
  if (!derivatives) return out;

  Eigen::MatrixXd resid = -prob;
  for (Eigen::Index i = 0; i < m; ++i) {
    const int y = design.response[static_cast<std::size_t>(i)];
    if (y > 0) resid(i, y - 1) += 1.0;
  }
  const Eigen::MatrixXd g = X.transpose() * resid;  // q x K
  out.grad = Eigen::Map<const Eigen::VectorXd>(g.data(), static_cast<Eigen::Index>(q) * K);

  out.hess = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(q) * K, static_cast<Eigen::Index>(q) * K);
  for (int k = 0; k < K; ++k) {
    for (int l = k; l < K; ++l) {
      Eigen::VectorXd w = -prob.col(k).cwiseProduct(prob.col(l));
      if (k == l) w += prob.col(k);
      const Eigen::MatrixXd block = -(X.transpose() * w.asDiagonal() * X);
      out.hess.block(k * q, l * q, q, q) = block;
      if (l != k) out.hess.block(l * q, k * q, q, q) = block.transpose();
    }
  }
  return out;
}

void check_block_matches(const LeafDesign& design, const ParamBlock& block) {
  if (block.p() != design.p || (block.h > 0 && block.d != design.d) || block.h > design.h)
    throw UsageError("parameter block does not fit the design of context " + design.context.str());
}

}  // namespace

Eigen::VectorXd log_transition_probabilities(const ParamBlock& block, const Eigen::Ref<const Eigen::MatrixXd>& recent) {
  const Eigen::VectorXd eta = linear_predictors(block, recent);
  const double lse = log_normalizer(eta);
  Eigen::VectorXd out(eta.size() + 1);
  out(0) = -lse;
  out.tail(eta.size()) = eta.array() - lse;
  return out;
}

Eigen::VectorXd transition_probabilities(const ParamBlock& block, const Eigen::Ref<const Eigen::MatrixXd>& recent) {
  return log_transition_probabilities(block, recent).array().exp();
}

double transition_probability(const ParamBlock& block, const Eigen::Ref<const Eigen::MatrixXd>& recent, int target) {
  if (target < 0 || target >= block.p()) throw UsageError("target state out of range");
  return transition_probabilities(block, recent)(target);
}

Eigen::MatrixXd recent_covariates(const Dataset& data, std::size_t t, int h) {
  if (static_cast<std::size_t>(h) > t) throw HistoryTooShort("not enough covariate history before time " + std::to_string(t));
  Eigen::MatrixXd out(h, data.dim());
  for (int lag = 0; lag < h; ++lag) out.row(lag) = data.covariates.row(static_cast<Eigen::Index>(t) - 1 - lag);
  return out;
}

LeafDesign design_from_times(const Dataset& data, const Context& u, std::span<const std::size_t> times, int h) {
  if (h < 0 || static_cast<std::size_t>(h) > u.size())
    throw UsageError("lag depth " + std::to_string(h) + " exceeds context length of " + u.str());
  LeafDesign design;
  design.context = u;
  design.p = data.p;
  design.d = data.dim();
  design.h = h;
  design.times.assign(times.begin(), times.end());
  design.response.reserve(times.size());
  design.regressors.resize(static_cast<Eigen::Index>(times.size()), design.width());
  for (std::size_t i = 0; i < times.size(); ++i) {
    const std::size_t t = times[i];
    if (t < static_cast<std::size_t>(h) || t >= data.size()) throw UsageError("design time out of range");
    design.response.push_back(data.states[t]);
    const auto row = static_cast<Eigen::Index>(i);
    design.regressors(row, 0) = 1.0;
    for (int lag = 0; lag < h; ++lag)
      design.regressors.row(row).segment(1 + lag * design.d, design.d) =
          data.covariates.row(static_cast<Eigen::Index>(t) - 1 - lag);
  }
  return design;
}

LeafDesign build_design(const Dataset& data, const ContextTree& tree, const Context& u, int h, std::size_t horizon) {
  horizon = std::max<std::size_t>(horizon, static_cast<std::size_t>(tree.order()));
  std::vector<std::size_t> times;
  for (std::size_t t = horizon; t < data.size(); ++t)
    if (tree.resolve(data.states, t) == u) times.push_back(t);
  return design_from_times(data, u, times, h);
}

LeafDesign build_design(const Dataset& data, const ContextTree& tree, const Context& u, int h) {
  return build_design(data, tree, u, h, static_cast<std::size_t>(tree.order()));
}

double log_likelihood(const ContextTree& tree, const Dataset& data, std::size_t horizon) {
  if (!tree.fully_parameterized()) throw UsageError("every leaf needs parameters to evaluate the likelihood");
  if (horizon < static_cast<std::size_t>(tree.order()))
    throw HistoryTooShort("conditioning horizon shorter than the tree order");
  double total = 0.0;
  for (std::size_t t = horizon; t < data.size(); ++t) {
    const Context leaf = tree.resolve(data.states, t);
    const ParamBlock& block = *tree.block(leaf);
    total += log_transition_probabilities(block, recent_covariates(data, t, block.h))(data.states[t]);
  }
  return total;
}

double log_likelihood(const ContextTree& tree, const Dataset& data) {
  return log_likelihood(tree, data, static_cast<std::size_t>(tree.order()));
}

double design_log_likelihood(const LeafDesign& design, const ParamBlock& block) {
  check_block_matches(design, block);
  return evaluate(design, 1 + block.h * design.d, block.flatten(), false).loglik;
}

Eigen::VectorXd gradient(const LeafDesign& design, const ParamBlock& block) {
  check_block_matches(design, block);
  return evaluate(design, 1 + block.h * design.d, block.flatten(), true).grad;
}

Eigen::MatrixXd hessian(const LeafDesign& design, const ParamBlock& block) {
  check_block_matches(design, block);
  return evaluate(design, 1 + block.h * design.d, block.flatten(), true).hess;
}

MleResult fit_leaf(const LeafDesign& design, std::optional<int> lags, const NewtonOptions& options) {
  const int h = lags.value_or(design.h);
  if (h < 0 || h > design.h) throw UsageError("constrained lag count outside the design");
  if (design.rows() == 0) throw UsageError("cannot fit context " + design.context.str() + ": no observations");
  const int K = design.p - 1;
  const int q = 1 + h * design.d;
  const auto n_par = static_cast<Eigen::Index>(K) * q;

  Eigen::VectorXd theta = Eigen::VectorXd::Zero(n_par);
  MleResult result;
  Evaluation current = evaluate(design, q, theta, true);

  for (result.iterations = 0; result.iterations < options.max_iterations; ++result.iterations) {
    result.gradient_norm = current.grad.lpNorm<Eigen::Infinity>();
    if (result.gradient_norm <= options.gradient_tolerance) {
      result.status = FitStatus::Converged;
      break;
    }

    Eigen::MatrixXd info = -current.hess;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
    double ridge = options.ridge;
    while (ldlt.info() != Eigen::Success || !ldlt.isPositive() || ldlt.vectorD().minCoeff() <= 0.0) {
      ldlt.compute(info + ridge * Eigen::MatrixXd::Identity(n_par, n_par));
      ridge *= 10.0;
      if (ridge > 1e6) break;
    }
    const Eigen::VectorXd step = ldlt.solve(current.grad);

    // Near the optimum the log-likelihood is flat to rounding, so a tiny
    // Newton decrement takes the full step without a line search.
    const double decrement = current.grad.dot(step);
    const bool local = decrement >= 0.0 && decrement <= 1e-10 * (1.0 + std::abs(current.loglik));

    double scale = 1.0;
    bool improved = false;
    Eigen::VectorXd candidate;
    double candidate_ll = -std::numeric_limits<double>::infinity();
    for (int halving = 0; halving <= options.max_halvings; ++halving) {
      candidate = theta + scale * step;
      candidate_ll = evaluate(design, q, candidate, false).loglik;
      if (std::isfinite(candidate_ll) && (local || candidate_ll >= current.loglik)) {
        improved = true;
        break;
      }
      scale *= 0.5;
    }
    if (!improved) {
      // No ascent direction left at working precision.
      result.status = FitStatus::NotConverged;
      break;
    }
    theta = candidate;
    current = evaluate(design, q, theta, true);
    if (theta.lpNorm<Eigen::Infinity>() > options.separation_bound) {
      result.status = FitStatus::SeparationDetected;
      result.gradient_norm = current.grad.lpNorm<Eigen::Infinity>();
      ++result.iterations;
      break;
    }
  }

  // An unobserved response class puts the MLE at infinity even when the
  // gradient flattens out before the coefficient bound.
  if (result.status == FitStatus::Converged) {
    std::vector<bool> seen(static_cast<std::size_t>(design.p), false);
    for (int y : design.response) seen[static_cast<std::size_t>(y)] = true;
    if (std::find(seen.begin(), seen.end(), false) != seen.end()) result.status = FitStatus::SeparationDetected;
  }

  result.loglik = current.loglik;
  ParamBlock fitted = ParamBlock::unflatten(design.p, design.d, h, theta);
  result.params = std::move(fitted);
  return result;
}

}  // namespace bvlmc
