#pragma once

#include "condcop/dataset.hpp"
#include "condcop/empirical.hpp"
#include "condcop/events.hpp"
#include "condcop/measures.hpp"
#include "condcop/rng.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace condcop {

enum class WeightKind { Multinomial, Multiplier, Dirichlet };
enum class MultiplierDist { StandardNormal, Rademacher, User };

/// Exchangeable bootstrap weights. Multiplier draws are i.i.d. with mean 0 and variance 1;
/// a user distribution must already be normalized that way.
struct WeightScheme {
    WeightKind kind = WeightKind::Multiplier;
    MultiplierDist dist = MultiplierDist::StandardNormal;
    std::function<double(Rng&)> user;
    std::uint64_t seed = 1;

    static WeightScheme multinomial(std::uint64_t seed);
    static WeightScheme multiplier(std::uint64_t seed, MultiplierDist dist = MultiplierDist::StandardNormal);
    static WeightScheme dirichlet(std::uint64_t seed);
    std::string name() const;
};

std::vector<double> gen_weights(const WeightScheme& scheme, std::size_t n, Rng& rng);
/// Weights of replicate `index`, drawn from the stream derived from (seed, index).
std::vector<double> gen_weights(const WeightScheme& scheme, std::size_t n, std::uint64_t index);

/// Weighted bootstrap process of D-bar at u.
double boot_process_Dstar(const CondEmpCopula& cop, std::span<const double> weights, std::span<const double> u);
/// Bootstrapped instrumental process with finite-difference derivative corrections.
double boot_process_Dtilde(const CondEmpCopula& cop, std::span<const double> weights, std::span<const double> u);
/// Bootstrapped conditional copula process.
double boot_process_Ctilde(const CondEmpCopula& cop, std::span<const double> weights, std::span<const double> u);

/// Row indices of a resample with replacement.
std::vector<std::size_t> resample_indices(std::size_t n, Rng& rng);
Dataset resample_nonparametric(const Dataset& data, Rng& rng);

/// A replicate as a linear form in the weights:
/// T(W) = n^{-1/2} (sum_s W[rows_s] coefs_s - constant * sum_i W_i).
struct InfluenceVector {
    std::size_t n = 0;
    std::vector<std::size_t> rows;
    std::vector<double> coefs;
    double constant = 0.0;

    double apply(std::span<const double> weights, double weight_sum) const;
    double apply(std::span<const double> weights) const;
};

/// Exact reduction of h -> functional(h), with h the bootstrapped copula process, to weights.
InfluenceVector influence_vector(const CondEmpCopula& cop, const PointFunctional& functional);

/// Replicates of sqrt(n)(statistic* - statistic), M x dim row-major.
struct BootstrapDraws {
    std::size_t M = 0;
    std::size_t dim = 0;
    std::vector<double> replicates;
    std::string scheme;
    std::string statistic_id;
    std::size_t failed = 0;
    std::size_t attempted = 0;

    double at(std::size_t r, std::size_t j) const { return replicates[r * dim + j]; }
    std::vector<double> column(std::size_t j) const;
    double failure_rate() const noexcept {
        return attempted == 0 ? 0.0 : static_cast<double>(failed) / static_cast<double>(attempted);
    }
};

enum class BootMethod { Exchangeable, Nonparametric };

struct BootstrapConfig {
    BootMethod method = BootMethod::Exchangeable;
    WeightScheme scheme;
    std::size_t M = 1000;
    double max_failure_rate = 0.05;
    QuadratureConfig quadrature;
};

/// Applies M weight draws to several influence vectors on a common sample.
BootstrapDraws draw_linear(std::span<const InfluenceVector> functionals, const WeightScheme& scheme,
                           std::size_t M);

/// Generic resample-and-recompute bootstrap of a vector statistic. A replicate fails when
/// the statistic throws condcop::Error; failures above max_failure_rate raise InsufficientSample.
BootstrapDraws boot_resample(const Dataset& data,
                             const std::function<std::vector<double>(const Dataset&)>& statistic,
                             std::size_t M, std::uint64_t seed, double max_failure_rate = 0.05);

/// Replicates of sqrt(n)(rho*_j - rho_j) on the reported scale, one column per event.
BootstrapDraws boot_measures(const Dataset& data, std::span<const std::size_t> x_cols,
                             std::span<const ResolvedEvent> events, std::span<const MeasureSpec> specs,
                             const BootstrapConfig& config);

/// Percentile interval from centred replicates T* = sqrt(n)(rho* - rho).
std::pair<double, double> percentile_ci(double estimate, std::span<const double> centred, std::size_t n,
                                        double level);

}  // namespace condcop
