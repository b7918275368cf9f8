#pragma once

#include "condcop/dataset.hpp"
#include "condcop/empirical.hpp"
#include "condcop/events.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace condcop {

enum class PsiKind { Constant1, Blomqvist, Tail, Gini, Reflection, Tabulated };

/// One-dimensional factor of a product weight: an indicator of [lo, hi], u, or 1 - u.
struct PsiFactor {
    enum class Kind { Interval, Identity, Complement };
    Kind kind = Kind::Interval;
    double lo = 0.0;
    double hi = 1.0;

    static PsiFactor one() { return {}; }
    double operator()(double u) const noexcept;
    /// Integral of the factor over [r, 1].
    double upper_integral(double r) const noexcept;
};

/// coef * prod_k factors[k](u_k).
struct PsiTerm {
    double coef = 1.0;
    std::vector<PsiFactor> factors;
};

/// Weight function of a generalized dependence measure.
class Psi {
public:
    static Psi constant();
    /// prod_k 1(u_k <= 1/2).
    static Psi blomqvist();
    /// 1(u <= u0) + 1(u >= v0), componentwise.
    static Psi tail(std::vector<double> u0, std::vector<double> v0);
    /// 2(|u + v - 1| - |u - v|), two dimensions only.
    static Psi gini();
    /// sum_eps w_eps prod_k (eps_k u_k + (1 - eps_k)(1 - u_k)).
    static Psi reflection(std::vector<std::pair<std::vector<int>, double>> weights);
    /// Multilinear interpolation of tabulated values.
    static Psi tabulated(GridEval table);

    PsiKind kind() const noexcept { return kind_; }
    std::string name() const;
    double operator()(std::span<const double> u) const;
    /// Sum-of-products form on [0,1]^p when one exists.
    std::optional<std::vector<PsiTerm>> separable(std::size_t p) const;
    bool continuous() const noexcept;
    void validate(std::size_t p) const;

    const std::vector<double>& tail_lower() const noexcept { return u0_; }
    const std::vector<double>& tail_upper() const noexcept { return v0_; }
    const std::vector<std::pair<std::vector<int>, double>>& reflection_weights() const noexcept {
        return refl_;
    }
    const GridEval& table() const noexcept { return table_; }

private:
    PsiKind kind_ = PsiKind::Constant1;
    std::vector<double> u0_, v0_;
    std::vector<std::pair<std::vector<int>, double>> refl_;
    GridEval table_;
};

/// (psi, K, K') with 0-based index sets, and an affine map applied to the reported value.
struct MeasureSpec {
    Psi psi = Psi::constant();
    std::vector<std::size_t> K;
    std::vector<std::size_t> K_prime;
    double scale = 1.0;
    double shift = 0.0;
    std::string label = "custom";

    void validate(std::size_t p) const;
    double report(double raw) const noexcept { return scale * raw + shift; }

    /// psi = 1, K = K' = I, reported as (2^p rho - 1) / (2^(p-1) - 1).
    static MeasureSpec kendall(std::size_t p);
    /// psi = 1, K = K' = {k, l}: Kendall's tau of one pair inside a larger copula.
    static MeasureSpec kendall_pair(std::size_t k, std::size_t l);
    /// psi = 1, K = I, K' empty, reported on the classical scale (12 rho - 3 for p = 2).
    static MeasureSpec spearman(std::size_t p);
    /// Blomqvist indicator with K empty and K' = I (rho = C(1/2,...,1/2)); 4 rho - 1 for p = 2.
    static MeasureSpec blomqvist(std::size_t p);
    /// Gini weight with K empty and K' = I.
    static MeasureSpec gini();
};

enum class IntegrationMethod { Auto, ClosedForm, Grid, QMC };

struct QuadratureConfig {
    IntegrationMethod method = IntegrationMethod::Auto;
    std::size_t grid_knots = 64;
    std::size_t qmc_points = std::size_t{1} << 16;
    std::size_t max_grid_dim = 3;  ///< Auto switches to QMC above this many free dimensions
    std::uint64_t seed = 0x5EEDULL;
};

enum class ResultMethod { ClosedForm, GridIntegration, MCIntegration };
std::string to_string(ResultMethod m);

struct MeasureResult {
    double estimate = 0.0;  ///< reported value, spec.report(raw)
    double raw = 0.0;       ///< the integral itself
    std::string event;
    std::size_t n = 0;
    std::size_t n_A = 0;
    double p_hat = 0.0;
    MeasureSpec spec;
    ResultMethod method = ResultMethod::ClosedForm;
    std::size_t grid_resolution = 0;
    std::size_t mc_draws = 0;
    bool clt_unsupported = false;
};

MeasureResult estimate_rho(const CondEmpCopula& cop, const MeasureSpec& spec,
                           const QuadratureConfig& cfg = {});

/// Integral of the hat copula given {X_j <= a_j for all j} (Z = X).
MeasureResult estimate_spearman_tail(const Dataset& data, std::span<const std::size_t> x_cols,
                                     std::span<const double> a);

/// One spec per event, or one spec broadcast over all events.
std::vector<MeasureResult> estimate_rho_family(const Dataset& data,
                                               std::span<const std::size_t> x_cols,
                                               std::span<const MeasureSpec> specs,
                                               std::span<const ResolvedEvent> events,
                                               const QuadratureConfig& cfg = {});

/// 4 * integral of C_{k,l} dC_{k,l} - 1, by weak-inequality pair counting.
double kendall_tau_cond(const CondEmpCopula& cop, std::size_t k, std::size_t l);

/// A linear functional h -> sum_q coef_q h(x_q), valid for functions h vanishing
/// whenever a coordinate is 0 and at (1,...,1).
struct PointFunctional {
    std::size_t dim = 0;
    std::vector<double> points;  ///< row-major
    std::vector<double> coefs;

    std::size_t size() const noexcept { return coefs.size(); }
    void add(std::span<const double> x, double c);
};

/// Derivative of the raw measure functional at the hat copula, as a point functional.
PointFunctional linearize_measure(const CondEmpCopula& cop, const MeasureSpec& spec,
                                  const QuadratureConfig& cfg = {});

}  // namespace condcop
