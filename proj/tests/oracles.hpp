#pragma once

// Independent reference implementations used only by the tests. None of
// them call into the library's numerical code.

#include <cmath>
#include <cstddef>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bvlmc/core.hpp"

namespace oracle {

// Occurrences of v (most recent symbol first) by sliding a window over the
// chronological sequence.
inline std::size_t window_count(const std::vector<int>& states, const std::string& v) {
  const std::size_t L = v.size();
  std::size_t count = 0;
  for (std::size_t end = L; end <= states.size(); ++end) {
    bool match = true;
    for (std::size_t k = 0; k < L && match; ++k) match = states[end - 1 - k] == v[k] - '0';
    count += match;
  }
  return count;
}

// Leaf of `tree` whose digit string is a suffix (in reverse time) of the
// history before t, found by trying every leaf.
inline std::string brute_leaf(const bvlmc::ContextTree& tree, const std::vector<int>& states, std::size_t t) {
  for (const auto& leaf : tree.leaves()) {
    const std::string s = leaf.str() == "<root>" ? "" : leaf.str();
    if (s.size() > t) continue;
    bool match = true;
    for (std::size_t k = 0; k < s.size() && match; ++k) match = states[t - 1 - k] == s[k] - '0';
    if (match) return s;
  }
  return "?";
}

// P(Y_t = y) written out term by term: exp(eta_y) / sum_j exp(eta_j) with
// eta_0 = 0.
inline double brute_probability(const bvlmc::ParamBlock& b, const Eigen::MatrixXd& x, std::size_t t, int y) {
  const int p = static_cast<int>(b.alpha.size()) + 1;
  std::vector<double> eta(static_cast<std::size_t>(p), 0.0);
  for (int k = 1; k < p; ++k) {
    double e = b.alpha(k - 1);
    for (int lag = 0; lag < b.h; ++lag)
      for (int j = 0; j < b.d; ++j)
        e += b.beta(k - 1, lag * b.d + j) * x(static_cast<Eigen::Index>(t) - 1 - lag, j);
    eta[static_cast<std::size_t>(k)] = e;
  }
  double denom = 0.0;
  for (double e : eta) denom += std::exp(e);
  return std::exp(eta[static_cast<std::size_t>(y)]) / denom;
}

// Log of the product of per-step probabilities from `horizon` on.
inline double brute_loglik(const bvlmc::ContextTree& tree, const bvlmc::Dataset& data, std::size_t horizon) {
  double prod_log = 0.0;
  for (std::size_t t = horizon; t < data.size(); ++t) {
    const std::string leaf = brute_leaf(tree, data.states, t);
    const auto& block = *tree.block(leaf.empty() ? bvlmc::Context{} : bvlmc::Context::parse(leaf));
    prod_log += std::log(brute_probability(block, data.covariates, t, data.states[t]));
  }
  return prod_log;
}

// Central differences of f at theta.
inline Eigen::VectorXd finite_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                                       const Eigen::VectorXd& theta, double step = 1e-5) {
  Eigen::VectorXd g(theta.size());
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    Eigen::VectorXd up = theta, down = theta;
    up(i) += step;
    down(i) -= step;
    g(i) = (f(up) - f(down)) / (2.0 * step);
  }
  return g;
}

inline double simpson(const std::function<double(double)>& f, double a, double b, double fa, double fm, double fb,
                      double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  if (depth <= 0 || std::abs(left + right - whole) <= 15.0 * tol) return left + right + (left + right - whole) / 15.0;
  return simpson(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) +
         simpson(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1);
}

// Chi-square CDF by adaptive Simpson quadrature of the density after the
// substitution u = t^2, which removes the df = 1 singularity at zero.
inline double chi2_cdf_quadrature(double x, int df) {
  if (x <= 0.0) return 0.0;
  const double k = df / 2.0;
  const double log_norm = -k * std::log(2.0) - std::lgamma(k);
  const auto integrand = [&](double t) {
    if (t <= 0.0) return df == 1 ? 2.0 * std::exp(log_norm) : 0.0;
    const double u = t * t;
    return 2.0 * t * std::exp(log_norm + (k - 1.0) * std::log(u) - u / 2.0);
  };
  const double b = std::sqrt(x);
  const double fa = integrand(0.0), fb = integrand(b), fm = integrand(b / 2.0);
  const double whole = b / 6.0 * (fa + 4.0 * fm + fb);
  return simpson(integrand, 0.0, b, fa, fm, fb, whole, 1e-13, 50);
}

// Random dataset with i.i.d. states and normal covariates.
inline bvlmc::Dataset random_dataset(int p, int d, std::size_t n, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_int_distribution<int> state(0, p - 1);
  std::normal_distribution<double> normal;
  bvlmc::Dataset data;
  data.p = p;
  data.states.resize(n);
  for (auto& y : data.states) y = state(rng);
  data.covariates.resize(static_cast<Eigen::Index>(n), d);
  for (Eigen::Index i = 0; i < data.covariates.size(); ++i) data.covariates.data()[i] = normal(rng);
  return data;
}

}  // namespace oracle
