#include "condcop/empirical.hpp"

#include "condcop/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace condcop {

std::size_t GridEval::size() const noexcept {
    std::size_t s = 1;
    for (const auto& k : knots) s *= k.size();
    return s;
}

std::vector<double> GridEval::point(std::size_t flat) const {
    std::vector<double> u(knots.size());
    for (std::size_t k = knots.size(); k-- > 0;) {
        u[k] = knots[k][flat % knots[k].size()];
        flat /= knots[k].size();
    }
    return u;
}

std::size_t GridEval::flat_index(std::span<const std::size_t> idx) const {
    std::size_t f = 0;
    for (std::size_t k = 0; k < knots.size(); ++k) f = f * knots[k].size() + idx[k];
    return f;
}

std::vector<double> GridEval::uniform_knots(std::size_t g) {
    std::vector<double> t(g);
    for (std::size_t a = 0; a < g; ++a) t[a] = static_cast<double>(a + 1) / static_cast<double>(g);
    return t;
}

std::vector<double> GridEval::closed_uniform_knots(std::size_t g) {
    std::vector<double> t(g + 1);
    for (std::size_t a = 0; a <= g; ++a) t[a] = static_cast<double>(a) / static_cast<double>(g);
    return t;
}

CondEmpCopula CondEmpCopula::fit(const Dataset& data, std::span<const std::size_t> x_cols,
                                 const ResolvedEvent& event) {
    if (x_cols.empty()) throw InvalidSpec("fit: no x-columns");
    if (event.n != data.rows()) throw InvalidSpec("fit: event resolved on a different sample");
    if (event.n_A < 2) {
        throw InsufficientSample("fit: event '" + event.name + "' has n_A = " +
                                 std::to_string(event.n_A) + " < 2");
    }
    CondEmpCopula c;
    c.event_ = event;
    c.x_cols_.assign(x_cols.begin(), x_cols.end());
    c.p_ = x_cols.size();
    c.n_ = data.rows();
    c.n_A_ = event.n_A;
    const std::size_t p = c.p_, m = c.n_A_;
    c.values_.resize(m * p);
    c.sorted_.resize(p);
    c.rmax_ = IntPoints(p);
    c.rmin_ = IntPoints(p);
    c.rmax_.coords.resize(m * p);
    c.rmin_.coords.resize(m * p);
    std::vector<std::size_t> order(m);
    for (std::size_t k = 0; k < p; ++k) {
        const auto col = data.column(x_cols[k]);
        for (std::size_t s = 0; s < m; ++s) c.values_[s * p + k] = col[event.members[s]];
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return c.values_[a * p + k] < c.values_[b * p + k];
        });
        auto& sorted = c.sorted_[k];
        sorted.resize(m);
        for (std::size_t r = 0; r < m; ++r) sorted[r] = c.values_[order[r] * p + k];
        std::size_t start = 0;
        while (start < m) {
            std::size_t end = start;
            while (end + 1 < m && sorted[end + 1] == sorted[start]) ++end;
            for (std::size_t r = start; r <= end; ++r) {
                c.rmin_.coords[order[r] * p + k] = static_cast<int>(start + 1);
                c.rmax_.coords[order[r] * p + k] = static_cast<int>(end + 1);
            }
            start = end + 1;
        }
    }
    return c;
}

std::vector<double> CondEmpCopula::pseudo_observations() const {
    std::vector<double> u(n_A_ * p_);
    for (std::size_t i = 0; i < u.size(); ++i) {
        u[i] = static_cast<double>(rmax_.coords[i]) / static_cast<double>(n_A_);
    }
    return u;
}

int CondEmpCopula::hat_threshold(double u) const noexcept {
    const double m = static_cast<double>(n_A_);
    if (!(u > 0.0)) return 0;
    if (u >= 1.0) return static_cast<int>(n_A_);
    auto j = static_cast<long>(std::floor(u * m));
    j = std::clamp<long>(j, 0, static_cast<long>(n_A_));
    while (j < static_cast<long>(n_A_) && static_cast<double>(j + 1) / m <= u) ++j;
    while (j > 0 && static_cast<double>(j) / m > u) --j;
    return static_cast<int>(j);
}

int CondEmpCopula::bar_threshold(double u) const noexcept {
    const double m = static_cast<double>(n_A_);
    if (!(u > 0.0)) return 0;
    if (u >= 1.0) return static_cast<int>(n_A_);
    auto j = static_cast<long>(std::ceil(u * m));
    j = std::clamp<long>(j, 1, static_cast<long>(n_A_));
    while (j > 1 && static_cast<double>(j - 1) / m >= u) --j;
    while (j < static_cast<long>(n_A_) && static_cast<double>(j) / m < u) ++j;
    return static_cast<int>(j);
}

double CondEmpCopula::quantile(std::size_t k, double u) const {
    const int j = bar_threshold(u);
    if (j == 0) return -std::numeric_limits<double>::infinity();
    return sorted_.at(k)[static_cast<std::size_t>(j - 1)];
}

double CondEmpCopula::eval_hat(std::span<const double> u) const {
    if (u.size() != p_) throw InvalidSpec("eval_hat: dimension mismatch");
    std::vector<int> t(p_);
    for (std::size_t k = 0; k < p_; ++k) t[k] = hat_threshold(u[k]);
    std::size_t count = 0;
    for (std::size_t s = 0; s < n_A_; ++s) {
        bool in = true;
        for (std::size_t k = 0; k < p_ && in; ++k) in = rmax_.coords[s * p_ + k] <= t[k];
        count += in;
    }
    return static_cast<double>(count) / static_cast<double>(n_A_);
}

double CondEmpCopula::eval_bar(std::span<const double> u) const {
    if (u.size() != p_) throw InvalidSpec("eval_bar: dimension mismatch");
    std::vector<int> t(p_);
    for (std::size_t k = 0; k < p_; ++k) t[k] = bar_threshold(u[k]);
    std::size_t count = 0;
    for (std::size_t s = 0; s < n_A_; ++s) {
        bool in = true;
        for (std::size_t k = 0; k < p_ && in; ++k) in = rmin_.coords[s * p_ + k] <= t[k];
        count += in;
    }
    return static_cast<double>(count) / static_cast<double>(n_A_);
}

double CondEmpCopula::partial_derivative_hat(std::span<const double> u, std::size_t k) const {
    if (u.size() != p_ || k >= p_) throw InvalidSpec("partial_derivative_hat: bad arguments");
    const double h = 1.0 / std::sqrt(static_cast<double>(n_));
    std::vector<double> up(u.begin(), u.end()), dn(u.begin(), u.end());
    up[k] = std::min(u[k] + h, 1.0);
    dn[k] = std::max(u[k] - h, 0.0);
    return (eval_D_bar(up) - eval_D_bar(dn)) / (up[k] - dn[k]);
}

IntPoints CondEmpCopula::hat_queries(std::span<const double> points) const {
    if (points.size() % p_ != 0) throw InvalidSpec("query points: size not a multiple of p");
    IntPoints q(p_);
    q.coords.resize(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) q.coords[i] = hat_threshold(points[i]);
    return q;
}

IntPoints CondEmpCopula::bar_queries(std::span<const double> points) const {
    if (points.size() % p_ != 0) throw InvalidSpec("query points: size not a multiple of p");
    IntPoints q(p_);
    q.coords.resize(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) q.coords[i] = bar_threshold(points[i]);
    return q;
}

std::vector<double> CondEmpCopula::eval_hat_many(std::span<const double> points) const {
    auto out = dominated_count(rmax_, hat_queries(points));
    for (double& v : out) v /= static_cast<double>(n_A_);
    return out;
}

std::vector<double> CondEmpCopula::eval_bar_many(std::span<const double> points) const {
    auto out = dominated_count(rmin_, bar_queries(points));
    for (double& v : out) v /= static_cast<double>(n_A_);
    return out;
}

std::vector<double> CondEmpCopula::eval_D_bar_many(std::span<const double> points) const {
    auto out = dominated_count(rmin_, bar_queries(points));
    for (double& v : out) v /= static_cast<double>(n_);
    return out;
}

std::vector<double> CondEmpCopula::partial_derivative_many(std::span<const double> points) const {
    const std::size_t m = points.size() / p_;
    const double h = 1.0 / std::sqrt(static_cast<double>(n_));
    std::vector<double> shifted;
    shifted.reserve(2 * m * p_ * p_);
    std::vector<double> width(m * p_);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t k = 0; k < p_; ++k) {
            const double uk = points[i * p_ + k];
            const double up = std::min(uk + h, 1.0), dn = std::max(uk - h, 0.0);
            width[i * p_ + k] = up - dn;
            for (double v : {up, dn}) {
                for (std::size_t l = 0; l < p_; ++l) shifted.push_back(l == k ? v : points[i * p_ + l]);
            }
        }
    }
    const auto d = eval_D_bar_many(shifted);
    std::vector<double> out(m * p_);
    for (std::size_t j = 0; j < m * p_; ++j) out[j] = (d[2 * j] - d[2 * j + 1]) / width[j];
    return out;
}

GridEval CondEmpCopula::grid_count(const std::vector<std::vector<double>>& knots, bool bar) const {
    if (knots.size() != p_) throw InvalidSpec("grid evaluation: dimension mismatch");
    GridEval g;
    g.knots = knots;
    std::vector<std::vector<int>> thr(p_);
    for (std::size_t k = 0; k < p_; ++k) {
        if (knots[k].empty()) throw InvalidSpec("grid evaluation: empty knot vector");
        for (std::size_t a = 0; a < knots[k].size(); ++a) {
            if (a > 0 && knots[k][a] < knots[k][a - 1]) throw InvalidSpec("grid knots must be sorted");
            thr[k].push_back(bar ? bar_threshold(knots[k][a]) : hat_threshold(knots[k][a]));
        }
    }
    std::vector<double> hist(g.size(), 0.0);
    const IntPoints& r = bar ? rmin_ : rmax_;
    std::vector<std::size_t> idx(p_);
    for (std::size_t s = 0; s < n_A_; ++s) {
        bool ok = true;
        for (std::size_t k = 0; k < p_ && ok; ++k) {
            auto it = std::lower_bound(thr[k].begin(), thr[k].end(), r.coords[s * p_ + k]);
            ok = it != thr[k].end();
            if (ok) idx[k] = static_cast<std::size_t>(it - thr[k].begin());
        }
        if (ok) hist[g.flat_index(idx)] += 1.0;
    }
    // Prefix sums along each dimension in turn.
    std::size_t stride = 1;
    for (std::size_t k = p_; k-- > 0;) {
        const std::size_t len = knots[k].size();
        const std::size_t block = stride * len;
        for (std::size_t base = 0; base < hist.size(); base += block) {
            for (std::size_t off = 0; off < stride; ++off) {
                for (std::size_t a = 1; a < len; ++a) {
                    hist[base + off + a * stride] += hist[base + off + (a - 1) * stride];
                }
            }
        }
        stride = block;
    }
    for (double& v : hist) v /= static_cast<double>(n_A_);
    g.values = std::move(hist);
    return g;
}

GridEval CondEmpCopula::eval_hat_grid(const std::vector<std::vector<double>>& knots) const {
    return grid_count(knots, false);
}

GridEval CondEmpCopula::eval_bar_grid(const std::vector<std::vector<double>>& knots) const {
    return grid_count(knots, true);
}

double eval_D_bar_cross(const CondEmpCopula& cop_j, const CondEmpCopula& cop_k,
                        std::span<const double> u_j, std::span<const double> u_k) {
    const std::size_t p = cop_j.dim();
    if (cop_k.dim() != p || cop_j.n() != cop_k.n() || cop_j.x_cols() != cop_k.x_cols()) {
        throw InvalidSpec("eval_D_bar_cross: copulas fitted on different data or columns");
    }
    if (u_j.size() != p || u_k.size() != p) throw InvalidSpec("eval_D_bar_cross: dimension mismatch");
    std::vector<double> thr(p);
    for (std::size_t l = 0; l < p; ++l) thr[l] = std::min(cop_j.quantile(l, u_j[l]), cop_k.quantile(l, u_k[l]));
    const auto& mj = cop_j.event().members;
    const auto& mk = cop_k.event().members;
    std::size_t a = 0, b = 0, count = 0;
    while (a < mj.size() && b < mk.size()) {
        if (mj[a] < mk[b]) {
            ++a;
        } else if (mk[b] < mj[a]) {
            ++b;
        } else {
            bool in = true;
            for (std::size_t l = 0; l < p && in; ++l) in = cop_j.value(a, l) <= thr[l];
            count += in;
            ++a;
            ++b;
        }
    }
    return static_cast<double>(count) / static_cast<double>(cop_j.n());
}

}  // namespace condcop
