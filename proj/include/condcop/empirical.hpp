#pragma once

#include "condcop/dataset.hpp"
#include "condcop/dominance.hpp"
#include "condcop/events.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace condcop {

/// Values of a function on a tensor mesh of [0,1]^p, row-major with the last dimension fastest.
struct GridEval {
    std::vector<std::vector<double>> knots;
    std::vector<double> values;

    std::size_t dim() const noexcept { return knots.size(); }
    std::size_t size() const noexcept;
    /// Coordinates of the mesh point with the given flat index.
    std::vector<double> point(std::size_t flat) const;
    std::size_t flat_index(std::span<const std::size_t> idx) const;

    /// Knots 1/g, 2/g, ..., 1.
    static std::vector<double> uniform_knots(std::size_t g);
    /// Knots 0, 1/g, ..., 1.
    static std::vector<double> closed_uniform_knots(std::size_t g);
};

/// Conditional empirical copula of the x-columns given a resolved event.
///
/// Per observation and column it keeps the sub-sample ranks
/// rank_max = #{j in A : X_j <= X_i} and rank_min = #{j in A : X_j < X_i} + 1.
/// The hat copula counts rank_max / n_A <= u_k, the bar copula counts
/// X_i <= F^{-1}(u_k), which is rank_min <= ceil-threshold of u_k.
class CondEmpCopula {
public:
    static CondEmpCopula fit(const Dataset& data, std::span<const std::size_t> x_cols,
                             const ResolvedEvent& event);

    std::size_t dim() const noexcept { return p_; }
    std::size_t n() const noexcept { return n_; }
    std::size_t n_A() const noexcept { return n_A_; }
    double p_hat() const noexcept { return static_cast<double>(n_A_) / static_cast<double>(n_); }
    const ResolvedEvent& event() const noexcept { return event_; }
    const std::vector<std::size_t>& x_cols() const noexcept { return x_cols_; }
    /// Dataset row of sub-sample observation s.
    std::size_t row(std::size_t s) const { return event_.members[s]; }

    int rank_max(std::size_t s, std::size_t k) const { return rmax_.coords[s * p_ + k]; }
    int rank_min(std::size_t s, std::size_t k) const { return rmin_.coords[s * p_ + k]; }
    double value(std::size_t s, std::size_t k) const { return values_[s * p_ + k]; }
    /// F_{n,k}(X_{s,k} | A).
    double cond_rank(std::size_t s, std::size_t k) const {
        return static_cast<double>(rank_max(s, k)) / static_cast<double>(n_A_);
    }
    /// Sub-sample pseudo-observations, n_A x p row-major.
    std::vector<double> pseudo_observations() const;
    const IntPoints& rank_max_points() const noexcept { return rmax_; }
    const IntPoints& rank_min_points() const noexcept { return rmin_; }

    /// max{j in 0..n_A : j/n_A <= u}.
    int hat_threshold(double u) const noexcept;
    /// min{j in 0..n_A : j/n_A >= u}, with 0 for u <= 0.
    int bar_threshold(double u) const noexcept;
    /// Generalized inverse F^{-1}_{n,k}(u | A); -infinity for u <= 0.
    double quantile(std::size_t k, double u) const;

    double eval_hat(std::span<const double> u) const;
    double eval_bar(std::span<const double> u) const;
    double eval_D_bar(std::span<const double> u) const { return p_hat() * eval_bar(u); }
    /// Finite-difference estimate of the k-th partial derivative of D(., A), bandwidth n^{-1/2}.
    double partial_derivative_hat(std::span<const double> u, std::size_t k) const;

    /// Batch versions over m points stored row-major (m x p).
    std::vector<double> eval_hat_many(std::span<const double> points) const;
    std::vector<double> eval_bar_many(std::span<const double> points) const;
    std::vector<double> eval_D_bar_many(std::span<const double> points) const;
    /// Returns m x p derivatives, row-major.
    std::vector<double> partial_derivative_many(std::span<const double> points) const;

    /// Exact evaluation on a tensor mesh through a histogram and prefix sums.
    GridEval eval_hat_grid(const std::vector<std::vector<double>>& knots) const;
    GridEval eval_bar_grid(const std::vector<std::vector<double>>& knots) const;

private:
    GridEval grid_count(const std::vector<std::vector<double>>& knots, bool bar) const;
    IntPoints hat_queries(std::span<const double> points) const;
    IntPoints bar_queries(std::span<const double> points) const;

    ResolvedEvent event_;
    std::vector<std::size_t> x_cols_;
    std::size_t p_ = 0;
    std::size_t n_ = 0;
    std::size_t n_A_ = 0;
    std::vector<double> values_;               // n_A x p sub-sample
    std::vector<std::vector<double>> sorted_;  // per column, sorted sub-sample
    IntPoints rmax_;
    IntPoints rmin_;
};

/// (1/n) #{i in A_j and A_k : X_il <= min(F^{-1}_{j,l}(u_j,l), F^{-1}_{k,l}(u_k,l)) for all l}.
double eval_D_bar_cross(const CondEmpCopula& cop_j, const CondEmpCopula& cop_k,
                        std::span<const double> u_j, std::span<const double> u_k);

}  // namespace condcop
