#include "bvlmc/stats.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "bvlmc/error.hpp"

namespace bvlmc {

namespace {

constexpr double kEps = 1e-16;
constexpr int kMaxTerms = 10000;

void check_args(double x, int df) {
  if (df < 1) throw DomainError("chi-square needs df >= 1, got " + std::to_string(df));
  if (!(x >= 0.0)) throw DomainError("chi-square argument must be >= 0");
}

// Regularized lower incomplete gamma P(a, x) by its power series.
double gamma_p_series(double a, double x) {
  double term = 1.0 / a;
  double sum = term;
  for (int n = 1; n < kMaxTerms; ++n) {
    term *= x / (a + n);
    sum += term;
    if (std::abs(term) < std::abs(sum) * kEps) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Regularized upper incomplete gamma Q(a, x) by modified Lentz.
double gamma_q_fraction(double a, double x) {
  constexpr double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < kMaxTerms; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < kEps) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace

double chi2_cdf(double x, int df) {
  check_args(x, df);
  if (x == 0.0) return 0.0;
  if (std::isinf(x)) return 1.0;
  const double a = 0.5 * df;
  const double z = 0.5 * x;
  if (z < a + 1.0) return gamma_p_series(a, z);
  return 1.0 - gamma_q_fraction(a, z);
}

double chi2_sf(double x, int df) {
  check_args(x, df);
  if (x == 0.0) return 1.0;
  if (std::isinf(x)) return 0.0;
  const double a = 0.5 * df;
  const double z = 0.5 * x;
  if (z < a + 1.0) return 1.0 - gamma_p_series(a, z);
  return gamma_q_fraction(a, z);
}

double chi2_pdf(double x, int df) {
  check_args(x, df);
  const double a = 0.5 * df;
  if (x == 0.0) {
    if (df == 1) return std::numeric_limits<double>::infinity();
    return df == 2 ? 0.5 : 0.0;
  }
  return std::exp((a - 1.0) * std::log(x) - 0.5 * x - a * std::log(2.0) - std::lgamma(a));
}

double chi2_quantile(double q, int df) {
  if (!(q > 0.0 && q < 1.0)) throw DomainError("chi-square quantile needs 0 < q < 1");
  if (df < 1) throw DomainError("chi-square needs df >= 1");

  double lo = 0.0;
  double hi = df + 10.0;
  while (chi2_cdf(hi, df) < q) {
    lo = hi;
    hi *= 2.0;
  }
  for (int i = 0; i < 200 && hi - lo > 1e-6 * (1.0 + hi); ++i) {
    const double mid = 0.5 * (lo + hi);
    (chi2_cdf(mid, df) < q ? lo : hi) = mid;
  }
  double x = 0.5 * (lo + hi);
  for (int i = 0; i < 50; ++i) {
    const double f = chi2_cdf(x, df) - q;
    const double dens = chi2_pdf(x, df);
    if (!(dens > 0.0) || !std::isfinite(dens)) break;
    double next = x - f / dens;
    // Stay inside the bracket; fall back to bisection otherwise.
    if (next <= lo || next >= hi) next = 0.5 * (lo + hi);
    (f < 0.0 ? lo : hi) = x;
    if (std::abs(next - x) <= 1e-15 * (1.0 + x)) {
      x = next;
      break;
    }
    x = next;
  }
  return x;
}

LrtResult lrt(double loglik_null, double loglik_alt, int df_removed) {
  if (df_removed < 1) throw DomainError("LRT needs at least one removed parameter");
  constexpr double nesting_tolerance = 1e-6;
  if (loglik_null > loglik_alt + nesting_tolerance)
    throw NestingViolation("null log-likelihood exceeds the alternative by " + std::to_string(loglik_null - loglik_alt));
  LrtResult out;
  out.df = df_removed;
  out.lambda = 2.0 * (loglik_alt - loglik_null);
  if (out.lambda <= 0.0) {
    out.clamped = out.lambda < 0.0;
    out.lambda = 0.0;
  }
  out.p_value = chi2_sf(out.lambda, df_removed);
  return out;
}

}  // namespace bvlmc
