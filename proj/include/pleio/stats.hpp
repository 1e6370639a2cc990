#pragma once

namespace pleio {

double norm_pdf(double x);
double norm_cdf(double x);
// Upper tail P(N > x); keeps precision where 1 - norm_cdf(x) would not.
double norm_sf(double x);
// Inverse of norm_cdf for p strictly inside (0,1) (Wichura's AS241).
double norm_quantile(double p);

// Two-sided normal p-value of a z statistic.
double two_sided_p(double z);

// Selection cutoff matching a two-sided p-value threshold:
// norm_quantile(1 - p/2).
double lambda_from_pvalue(double p_two_sided);

// Mills ratio norm_sf(x)/norm_pdf(x), stable for large positive x.
double mills_ratio(double x);

// P(lo1 <= W1 <= hi1, lo2 <= W2 <= hi2) for standard bivariate normal
// (W1, W2) with correlation rho. Infinite limits are accepted.
double bvn_rect_prob(double lo1, double hi1, double lo2, double hi2, double rho);

}  // namespace pleio
