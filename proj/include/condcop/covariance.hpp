#pragma once

#include "condcop/empirical.hpp"
#include "condcop/measures.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace condcop {

struct CovOptions {
    /// Use p_hat for the k-th derivative at points (u_k, 1, ..., 1) instead of the finite difference.
    bool exact_margin_derivatives = false;
};

/// Summands of the plug-in covariance of the limiting copula process.
/// m_k denotes (u_k, 1_{-k}), D and dD the joint function and its partial derivatives.
struct CovTerms {
    double v_term = 0;          ///< v(u1,u2) / (p1 p2)
    double corner = 0;          ///< D1 D2 v(1,1) / (p1^2 p2^2)
    double margin_margin = 0;   ///< double sum over (k,l) of dD1k dD2l {...}
    double margin_point_1 = 0;  ///< -sum_k dD1k {v(m1k,u2) - u1k v(1,u2)} / (p1^2 p2)
    double margin_point_2 = 0;  ///< -sum_l dD2l {v(u1,m2l) - u2l v(u1,1)} / (p2^2 p1)
    double point_corner_1 = 0;  ///< -D1 v(1,u2) / (p1^2 p2)
    double point_corner_2 = 0;  ///< -D2 v(u1,1) / (p2^2 p1)
    double margin_corner_1 = 0; ///< D2 sum_k dD1k {v(m1k,1) - u1k v(1,1)} / (p1^2 p2^2)
    double margin_corner_2 = 0; ///< D1 sum_l dD2l {v(1,m2l) - u2l v(1,1)} / (p1^2 p2^2)

    double total() const noexcept;
};

/// Plug-in estimator of the covariance E[C_inf(u1|A1) C_inf(u2|A2)] for one or two fitted
/// conditional copulas on the same dataset.
class CovPlugin {
public:
    explicit CovPlugin(const CondEmpCopula& cop, CovOptions opts = {});
    CovPlugin(const CondEmpCopula& cop1, const CondEmpCopula& cop2, CovOptions opts = {});

    /// True when both copulas share the event and the x-columns.
    bool same_event() const noexcept { return same_; }

    /// Estimated E[B(a,A1) B(b,A2)].
    double v(std::span<const double> a, std::span<const double> b) const;
    CovTerms terms(std::span<const double> u1, std::span<const double> u2) const;
    double cov(std::span<const double> u1, std::span<const double> u2) const { return terms(u1, u2).total(); }
    /// m1 x m2 matrix, row-major, for points stored row-major (m x p).
    std::vector<double> cov_matrix(std::span<const double> points1, std::span<const double> points2) const;

    /// Tabulates the hat copula on the mesh knots x {1} in every dimension; same-event
    /// evaluations whose coordinates all lie on the mesh then become lookups.
    void tabulate(const std::vector<double>& knots);

    /// Joint-function value and cached derivative estimates at a point.
    struct PointInfo {
        std::vector<double> u;
        double D = 0;
        std::vector<double> dD;
    };
    /// which = 0 for the first copula, 1 for the second.
    PointInfo point_info(int which, std::span<const double> u) const;
    std::vector<PointInfo> point_infos(int which, std::span<const double> points) const;
    CovTerms terms(const PointInfo& a, const PointInfo& b) const;

    const CondEmpCopula& cop(int which) const noexcept { return which == 0 ? *c1_ : *c2_; }

    /// Hat copula of the first fit, from the table when possible.
    double hat(std::span<const double> u) const;

    /// Evaluates many (u1,u2) pairs with batched copula counts. Points row-major m x p.
    std::vector<double> cov_pairs(std::span<const double> points1, std::span<const double> points2) const;

private:
    template <class V>
    CovTerms terms_from(const PointInfo& a, const PointInfo& b, V&& v) const;
    void apply_margin_rule(PointInfo& info, double p_hat) const;

    const CondEmpCopula* c1_;
    const CondEmpCopula* c2_;
    CovOptions opts_;
    bool same_ = true;
    std::vector<double> table_knots_;
    GridEval table_;
};

/// Same event: p C_hat(u1 ^ u2) - p^2 C_hat(u1) C_hat(u2).
/// Different events: D_bar_cross(u1,u2) - D_bar(u1,A1) D_bar(u2,A2).
double v_hat(const CondEmpCopula& cop_j, const CondEmpCopula& cop_k, std::span<const double> u1,
             std::span<const double> u2);

double cov_Cinfty(const CondEmpCopula& cop_j, const CondEmpCopula& cop_k, std::span<const double> u1,
                  std::span<const double> u2, CovOptions opts = {});
CovTerms cov_Cinfty_terms(const CondEmpCopula& cop_j, const CondEmpCopula& cop_k, std::span<const double> u1,
                          std::span<const double> u2, CovOptions opts = {});

/// Default mesh for the double integral: 32 midpoints per dimension up to p = 2, then
/// 2^14 shifted Sobol points in [0,1]^{2p}.
QuadratureConfig covariance_quadrature();

/// Double integral of the plug-in covariance over [0,1]^p x [0,1]^p, the asymptotic
/// variance of sqrt(n) (rho_S_hat - rho_S) for rho_S = int C(u|A) du.
double sigma2_spearman(const CondEmpCopula& cop, const QuadratureConfig& cfg = covariance_quadrature(),
                       CovOptions opts = {});

/// Same for the event {X_j <= a_j for all j} on the x-columns themselves.
double sigma2_spearman(const Dataset& data, std::span<const std::size_t> x_cols, std::span<const double> a,
                       const QuadratureConfig& cfg = covariance_quadrature(), CovOptions opts = {});

}  // namespace condcop
