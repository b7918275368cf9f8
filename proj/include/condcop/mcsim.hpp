#pragma once

#include "condcop/bootstrap.hpp"
#include "condcop/covariance.hpp"
#include "condcop/dataset.hpp"
#include "condcop/empirical.hpp"
#include "condcop/eqtest.hpp"
#include "condcop/events.hpp"
#include "condcop/measures.hpp"

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace condcop {

enum class DGPKind { IndependenceAll, GaussianCopula, ClaytonPair };
enum class ZLink { Independent, ZIsX, ZCorrelated };

/// Known joint laws of (X, Z). Data columns are X1..Xp followed by Z1..Zq.
///
/// IndependenceAll: all columns i.i.d. uniform on [0,1].
/// GaussianCopula: X ~ N(0, R) and a single Z = rho_z X_j + sqrt(1 - rho_z^2) e, with rho_z = 0
///   for an independent Z and rho_z = 1 when Z is a copy of X_j.
/// ClaytonPair: Z uniform on [0,1]; given Z, X is a Clayton pair with uniform margins and
///   parameter theta_in when Z lies in [regime_lo, regime_hi], theta_out otherwise (0 = independence).
struct DGPSpec {
    DGPKind kind = DGPKind::IndependenceAll;
    std::size_t p = 2;
    std::size_t q = 1;
    std::vector<double> R;  ///< p x p correlation matrix, row-major
    ZLink link = ZLink::Independent;
    double rho_z = 0.0;
    std::size_t z_source = 0;  ///< j, the X component Z is linked to
    double theta_in = 2.0;
    double theta_out = 0.0;
    double regime_lo = 0.0;
    double regime_hi = 1.0;
    std::size_t n = 500;
    std::uint64_t seed = 1;

    static DGPSpec independence(std::size_t p, std::size_t q, std::size_t n, std::uint64_t seed);
    /// Bivariate Gaussian copula with correlation rho.
    static DGPSpec gaussian(double rho, ZLink link, double rho_z, std::size_t n, std::uint64_t seed);
    static DGPSpec gaussian(std::vector<double> R, std::size_t p, ZLink link, double rho_z, std::size_t n,
                            std::uint64_t seed);
    static DGPSpec clayton(double theta_in, double theta_out, double regime_lo, double regime_hi, std::size_t n,
                           std::uint64_t seed);

    /// Throws InvalidSpec for non-PD correlation matrices, theta < 0 and similar.
    void validate() const;
    std::vector<std::size_t> x_cols() const;
    std::size_t z_col(std::size_t j = 0) const { return p + j; }
    /// Effective rho_z after applying the link.
    double link_strength() const;
};

/// Draws one sample of size dgp.n.
Dataset simulate(const DGPSpec& dgp);
/// Same law with the given seed and size.
Dataset simulate(const DGPSpec& dgp, std::size_t n, std::uint64_t seed);

/// Box on Z_j between two population quantile levels; its probability is hi - lo.
BoxSpec population_quantile_box(const DGPSpec& dgp, double lo, double hi, std::size_t j = 0,
                                std::string name = {});

/// Law of X given Z in a fixed value box.
class ConditionalLaw {
public:
    virtual ~ConditionalLaw() = default;
    virtual std::size_t dim() const = 0;
    virtual double p_A() const = 0;
    /// F_k(x | Z in A).
    virtual double margin(std::size_t k, double x) const = 0;
    /// C(u | A).
    virtual double copula(std::span<const double> u) const = 0;
    /// d/du_k C(u | A), the left limit at u_k = 1.
    virtual double copula_partial(std::span<const double> u, std::size_t k) const = 0;
    /// Conditional Kendall's tau (dimension 2).
    virtual double kendall() const = 0;

    double D(std::span<const double> u) const { return p_A() * copula(u); }
    double D_partial(std::span<const double> u, std::size_t k) const { return p_A() * copula_partial(u, k); }
};

/// The conditional law for a box; bounds may only involve Z columns.
std::shared_ptr<const ConditionalLaw> conditional_law(const DGPSpec& dgp, std::span<const ResolvedBound> box);
std::shared_ptr<const ConditionalLaw> conditional_law(const DGPSpec& dgp, const BoxSpec& box);

struct OracleSample {
    Dataset data;
    std::vector<ResolvedEvent> events;
    std::vector<std::shared_ptr<const ConditionalLaw>> laws;
    /// Per event, n_A x p row-major U^A_{i,k} = F_k(X_{i,k} | Z in A) in member order.
    std::vector<std::vector<double>> true_U_A;
};

OracleSample simulate_oracle(const DGPSpec& dgp, std::span<const BoxSpec> events);
OracleSample simulate_oracle(const DGPSpec& dgp, std::span<const BoxSpec> events, std::size_t n,
                             std::uint64_t seed);

/// True partial derivatives of D(., A) on the mesh uniform_knots(g)^p, m x p row-major.
struct DerivativeTable {
    std::size_t g = 0;
    std::size_t p = 0;
    double p_A = 1.0;
    std::vector<double> values;
};
DerivativeTable derivative_table(const ConditionalLaw& law, std::size_t g);

/// sup over the mesh of |Dbar_n - Dtilde_n|, where Dbar_n = sqrt(n)(Dbar_n - D) uses the
/// conditional ranks and Dtilde_n is the instrumental process built from the true U^A and
/// true partial derivatives.
double process_distance(const CondEmpCopula& cop, std::span<const double> true_U, const DerivativeTable& dD);
double process_distance(const OracleSample& sample, std::size_t event, std::size_t g);

/// sup over the mesh of |C_hat_n(.|A) - C(.|A)|.
double copula_sup_error(const CondEmpCopula& cop, const ConditionalLaw& law, std::size_t g);
/// The same error against a precomputed table of C on uniform_knots(g)^p.
double copula_sup_error(const CondEmpCopula& cop, const GridEval& truth);
GridEval copula_table(const ConditionalLaw& law, std::size_t g);

/// Proximity bound between the two copula estimators on a mesh and the derivative bound
/// at the mesh points.
bool empirical_invariants_hold(const CondEmpCopula& cop, std::size_t g = 20);

/// Reference value of a measure under the law: Kendall specs only, on the reported scale.
double true_measure(const ConditionalLaw& law, const MeasureSpec& spec);

// -- studies -------------------------------------------------------------------------------

struct ConvergenceReport {
    std::vector<std::size_t> ns;
    std::vector<double> median_distance;
    std::vector<double> median_copula_error;
    std::size_t reps = 0;
    std::size_t paired_improvements = 0;  ///< reps where the largest n beats the smallest n
    std::size_t invariant_failures = 0;
    bool distance_strictly_decreasing = false;
    bool copula_error_strictly_decreasing = false;
};
ConvergenceReport convergence_study(const DGPSpec& dgp, const BoxSpec& event, std::span<const std::size_t> ns,
                                    std::size_t reps, std::size_t grid = 20);

struct CoverageReport {
    double true_value = 0.0;
    std::size_t reps = 0;
    std::size_t covered = 0;
    double coverage = 0.0;
    double std_error = 0.0;
    double mean_width = 0.0;
    double level = 0.95;
};
CoverageReport coverage_study(const DGPSpec& dgp, const BoxSpec& event, const MeasureSpec& spec,
                              const BootstrapConfig& cfg, double level, std::size_t reps);

struct ValidityReport {
    double true_value = 0.0;
    double kolmogorov_distance = 0.0;
    double boot_sd = 0.0;
    double mc_sd = 0.0;
    double boot_mean = 0.0;
    double mc_mean = 0.0;  ///< finite-sample bias of the estimator on the sqrt(n) scale
    /// Distance after centring both samples at their means.
    double centred_distance = 0.0;
    std::size_t M = 0;
    std::size_t mc_reps = 0;
};
/// Kolmogorov distance between bootstrap replicates sqrt(n)(rho* - rho_hat) on one sample and
/// the Monte Carlo law of sqrt(n)(rho_hat - rho) over mc_reps samples.
ValidityReport bootstrap_validity_study(const DGPSpec& dgp, const BoxSpec& event, const MeasureSpec& spec,
                                        const BootstrapConfig& cfg, std::size_t mc_reps);

struct RejectionReport {
    std::vector<StatKind> kinds;
    std::vector<double> rejection_rate;
    std::vector<std::size_t> rejections;
    std::size_t reps = 0;
    double alpha = 0.05;
};
RejectionReport rejection_study(const DGPSpec& dgp, std::span<const BoxSpec> events, const MeasureSpec& spec,
                                const BootstrapConfig& cfg, double alpha, std::size_t reps);

struct CovarianceReport {
    std::size_t points = 0;
    std::size_t compared = 0;          ///< entries with |plug-in| above the threshold
    std::size_t within_tolerance = 0;
    double max_relative_error = 0.0;
    double median_relative_error = 0.0;
    double max_abs_error = 0.0;
    std::vector<double> plugin;     ///< points x points
    std::vector<double> bootstrap;  ///< points x points
};
/// Plug-in covariance against the empirical covariance of M copula-process replicates on one sample.
CovarianceReport covariance_study(const DGPSpec& dgp, const BoxSpec& event, std::span<const double> points,
                                  const BootstrapConfig& cfg, double threshold = 0.01, double tolerance = 0.2);

}  // namespace condcop
