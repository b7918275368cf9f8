#pragma once

namespace condcop {

/// Standard normal density, distribution function and quantile. The cdf accepts +-infinity.
double normal_pdf(double x);
double normal_cdf(double x);
double normal_quantile(double p);

/// P(X <= h, Y <= k) for a standard bivariate normal with correlation r in (-1, 1).
double bivariate_normal_cdf(double h, double k, double r);

}  // namespace condcop
