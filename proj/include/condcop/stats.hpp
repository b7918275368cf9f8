#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace condcop {

double mean(std::span<const double> x);
/// Sample variance with divisor n - 1.
double variance(std::span<const double> x);
double median(std::vector<double> x);
/// Linearly interpolated sample quantile (type 7).
double quantile_linear(std::vector<double> x, double prob);
/// sup_t |F_a(t) - F_b(t)| between two empirical distributions.
double ks_distance(std::vector<double> a, std::vector<double> b);
/// One-sample Kolmogorov-Smirnov statistic against Uniform[0,1].
double ks_uniform_statistic(std::vector<double> x);
/// Asymptotic Kolmogorov tail probability P(K > sqrt(n) d), with the usual small-sample correction.
double ks_pvalue(double d, std::size_t n);
double correlation(std::span<const double> a, std::span<const double> b);

}  // namespace condcop
