#pragma once

namespace bvlmc {

/// Chi-square CDF, P(df/2, x/2). Series below x/2 < df/2 + 1, Lentz
/// continued fraction above.
double chi2_cdf(double x, int df);
/// Upper tail 1 - chi2_cdf(x, df), computed without cancellation.
double chi2_sf(double x, int df);
double chi2_pdf(double x, int df);
/// Inverse of chi2_cdf: bracketed bisection, then Newton polish.
double chi2_quantile(double q, int df);

struct LrtResult {
  double lambda = 0.0;
  int df = 1;
  double p_value = 1.0;
  /// True when a slightly negative deviance was clamped to zero.
  bool clamped = false;
};

/// Likelihood-ratio test of a nested null against an alternative with
/// `df_removed` more free parameters.
LrtResult lrt(double loglik_null, double loglik_alt, int df_removed);

}  // namespace bvlmc
