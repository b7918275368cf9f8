#include "condcop/covariance.hpp"

#include "condcop/errors.hpp"
#include "condcop/quadrature.hpp"

#include <algorithm>
#include <cmath>

namespace condcop {

double CovTerms::total() const noexcept {
    return v_term + corner + margin_margin + margin_point_1 + margin_point_2 + point_corner_1 + point_corner_2 +
           margin_corner_1 + margin_corner_2;
}

namespace {

bool shares_event(const CondEmpCopula& a, const CondEmpCopula& b) {
    if (&a == &b) return true;
    return a.n() == b.n() && a.x_cols() == b.x_cols() && a.event().members == b.event().members;
}

std::vector<double> meet(std::span<const double> a, std::span<const double> b) {
    std::vector<double> m(a.size());
    for (std::size_t k = 0; k < a.size(); ++k) m[k] = std::min(a[k], b[k]);
    return m;
}

}  // namespace

CovPlugin::CovPlugin(const CondEmpCopula& cop, CovOptions opts) : c1_(&cop), c2_(&cop), opts_(opts), same_(true) {}

CovPlugin::CovPlugin(const CondEmpCopula& cop1, const CondEmpCopula& cop2, CovOptions opts)
    : c1_(&cop1), c2_(&cop2), opts_(opts) {
    if (cop1.n() != cop2.n()) throw InvalidSpec("covariance: copulas fitted on different datasets");
    if (cop1.dim() != cop2.dim()) throw InvalidSpec("covariance: copulas of different dimension");
    same_ = shares_event(cop1, cop2);
}

void CovPlugin::tabulate(const std::vector<double>& knots) {
    table_knots_ = knots;
    std::sort(table_knots_.begin(), table_knots_.end());
    if (table_knots_.empty() || table_knots_.back() != 1.0) table_knots_.push_back(1.0);
    table_ = c1_->eval_hat_grid(std::vector<std::vector<double>>(c1_->dim(), table_knots_));
}

double CovPlugin::hat(std::span<const double> u) const {
    if (!table_knots_.empty()) {
        std::size_t flat = 0;
        bool hit = true;
        for (std::size_t k = 0; k < u.size() && hit; ++k) {
            auto it = std::lower_bound(table_knots_.begin(), table_knots_.end(), u[k]);
            hit = it != table_knots_.end() && *it == u[k];
            flat = flat * table_knots_.size() + static_cast<std::size_t>(it - table_knots_.begin());
        }
        if (hit) return table_.values[flat];
    }
    return c1_->eval_hat(u);
}

double CovPlugin::v(std::span<const double> a, std::span<const double> b) const {
    if (same_) {
        const double p = c1_->p_hat();
        const auto m = meet(a, b);
        return p * hat(m) - p * p * hat(a) * hat(b);
    }
    return eval_D_bar_cross(*c1_, *c2_, a, b) - c1_->eval_D_bar(a) * c2_->eval_D_bar(b);
}

void CovPlugin::apply_margin_rule(PointInfo& info, double p_hat) const {
    if (!opts_.exact_margin_derivatives) return;
    std::size_t not_one = 0, idx = 0;
    for (std::size_t k = 0; k < info.u.size(); ++k)
        if (info.u[k] != 1.0) {
            ++not_one;
            idx = k;
        }
    // Pure-margin argument: D((u_k, 1_{-k}), A) = u_k p_A.
    if (not_one == 0)
        std::fill(info.dD.begin(), info.dD.end(), p_hat);
    else if (not_one == 1)
        info.dD[idx] = p_hat;
}

CovPlugin::PointInfo CovPlugin::point_info(int which, std::span<const double> u) const {
    const auto& c = cop(which);
    if (u.size() != c.dim()) throw InvalidSpec("covariance: dimension mismatch");
    PointInfo info;
    info.u.assign(u.begin(), u.end());
    info.D = c.eval_D_bar(u);
    info.dD.resize(u.size());
    for (std::size_t k = 0; k < u.size(); ++k) info.dD[k] = c.partial_derivative_hat(u, k);
    apply_margin_rule(info, c.p_hat());
    return info;
}

std::vector<CovPlugin::PointInfo> CovPlugin::point_infos(int which, std::span<const double> points) const {
    const auto& c = cop(which);
    const std::size_t p = c.dim();
    if (points.size() % p != 0) throw InvalidSpec("covariance: point array size not a multiple of p");
    const std::size_t m = points.size() / p;
    const auto D = c.eval_D_bar_many(points);
    const auto dD = c.partial_derivative_many(points);
    std::vector<PointInfo> out(m);
    for (std::size_t i = 0; i < m; ++i) {
        out[i].u.assign(points.begin() + i * p, points.begin() + (i + 1) * p);
        out[i].D = D[i];
        out[i].dD.assign(dD.begin() + i * p, dD.begin() + (i + 1) * p);
        apply_margin_rule(out[i], c.p_hat());
    }
    return out;
}

template <class V>
CovTerms CovPlugin::terms_from(const PointInfo& a, const PointInfo& b, V&& v) const {
    const std::size_t p = a.u.size();
    const double p1 = c1_->p_hat(), p2 = c2_->p_hat();
    const std::vector<double> one(p, 1.0);
    const auto margin = [&](const std::vector<double>& u, std::size_t k) {
        std::vector<double> m(p, 1.0);
        m[k] = u[k];
        return m;
    };
    const double v11 = v(one, one);
    const double v1b = v(one, b.u);
    const double va1 = v(a.u, one);

    CovTerms t;
    t.v_term = v(a.u, b.u) / (p1 * p2);
    t.corner = a.D * b.D * v11 / (p1 * p1 * p2 * p2);

    std::vector<std::vector<double>> ma(p), mb(p);
    for (std::size_t k = 0; k < p; ++k) {
        ma[k] = margin(a.u, k);
        mb[k] = margin(b.u, k);
    }
    std::vector<double> vm1(p), v1m(p);
    for (std::size_t k = 0; k < p; ++k) {
        vm1[k] = v(ma[k], one);
        v1m[k] = v(one, mb[k]);
    }

    double s = 0;
    for (std::size_t k = 0; k < p; ++k)
        for (std::size_t l = 0; l < p; ++l) {
            if (a.dD[k] == 0.0 || b.dD[l] == 0.0) continue;
            s += a.dD[k] * b.dD[l] *
                 (v(ma[k], mb[l]) - a.u[k] * v1m[l] - b.u[l] * vm1[k] + a.u[k] * b.u[l] * v11);
        }
    t.margin_margin = s / (p1 * p1 * p2 * p2);

    s = 0;
    for (std::size_t k = 0; k < p; ++k)
        if (a.dD[k] != 0.0) s += a.dD[k] * (v(ma[k], b.u) - a.u[k] * v1b);
    t.margin_point_1 = -s / (p1 * p1 * p2);
    s = 0;
    for (std::size_t l = 0; l < p; ++l)
        if (b.dD[l] != 0.0) s += b.dD[l] * (v(a.u, mb[l]) - b.u[l] * va1);
    t.margin_point_2 = -s / (p2 * p2 * p1);

    t.point_corner_1 = -a.D * v1b / (p1 * p1 * p2);
    t.point_corner_2 = -b.D * va1 / (p2 * p2 * p1);

    s = 0;
    for (std::size_t k = 0; k < p; ++k) s += a.dD[k] * (vm1[k] - a.u[k] * v11);
    t.margin_corner_1 = b.D * s / (p1 * p1 * p2 * p2);
    s = 0;
    for (std::size_t l = 0; l < p; ++l) s += b.dD[l] * (v1m[l] - b.u[l] * v11);
    t.margin_corner_2 = a.D * s / (p1 * p1 * p2 * p2);
    return t;
}

CovTerms CovPlugin::terms(const PointInfo& a, const PointInfo& b) const {
    return terms_from(a, b, [this](std::span<const double> x, std::span<const double> y) { return v(x, y); });
}

CovTerms CovPlugin::terms(std::span<const double> u1, std::span<const double> u2) const {
    return terms(point_info(0, u1), point_info(1, u2));
}

std::vector<double> CovPlugin::cov_matrix(std::span<const double> points1, std::span<const double> points2) const {
    const auto a = point_infos(0, points1);
    const auto b = point_infos(1, points2);
    std::vector<double> out(a.size() * b.size());
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j) out[i * b.size() + j] = terms(a[i], b[j]).total();
    return out;
}

std::vector<double> CovPlugin::cov_pairs(std::span<const double> points1, std::span<const double> points2) const {
    if (points1.size() != points2.size()) throw InvalidSpec("cov_pairs: point arrays differ in size");
    const auto a = point_infos(0, points1);
    const auto b = point_infos(1, points2);
    const std::size_t m = a.size();
    std::vector<double> out(m);
    if (!same_) {
        for (std::size_t i = 0; i < m; ++i) out[i] = terms(a[i], b[i]).total();
        return out;
    }
    // First pass records every hat-copula argument, one batched count, then a replay pass.
    const double p = c1_->p_hat();
    std::vector<double> queries;
    auto record = [&](std::span<const double> x, std::span<const double> y) {
        const auto mxy = meet(x, y);
        queries.insert(queries.end(), mxy.begin(), mxy.end());
        queries.insert(queries.end(), x.begin(), x.end());
        queries.insert(queries.end(), y.begin(), y.end());
        return 0.0;
    };
    for (std::size_t i = 0; i < m; ++i) terms_from(a[i], b[i], record);
    const auto vals = c1_->eval_hat_many(queries);
    std::size_t pos = 0;
    auto replay = [&](std::span<const double>, std::span<const double>) {
        const double r = p * vals[pos] - p * p * vals[pos + 1] * vals[pos + 2];
        pos += 3;
        return r;
    };
    for (std::size_t i = 0; i < m; ++i) out[i] = terms_from(a[i], b[i], replay).total();
    return out;
}

double v_hat(const CondEmpCopula& cop_j, const CondEmpCopula& cop_k, std::span<const double> u1,
             std::span<const double> u2) {
    return CovPlugin(cop_j, cop_k).v(u1, u2);
}

double cov_Cinfty(const CondEmpCopula& cop_j, const CondEmpCopula& cop_k, std::span<const double> u1,
                  std::span<const double> u2, CovOptions opts) {
    return CovPlugin(cop_j, cop_k, opts).cov(u1, u2);
}

CovTerms cov_Cinfty_terms(const CondEmpCopula& cop_j, const CondEmpCopula& cop_k, std::span<const double> u1,
                          std::span<const double> u2, CovOptions opts) {
    return CovPlugin(cop_j, cop_k, opts).terms(u1, u2);
}

QuadratureConfig covariance_quadrature() {
    QuadratureConfig cfg;
    cfg.grid_knots = 32;
    cfg.qmc_points = std::size_t{1} << 14;
    cfg.max_grid_dim = 2;
    return cfg;
}

double sigma2_spearman(const CondEmpCopula& cop, const QuadratureConfig& cfg, CovOptions opts) {
    const std::size_t p = cop.dim();
    CovPlugin plug(cop, opts);
    const bool grid = cfg.method == IntegrationMethod::Grid || cfg.method == IntegrationMethod::ClosedForm ||
                      (cfg.method == IntegrationMethod::Auto && p <= cfg.max_grid_dim);
    if (grid) {
        const std::size_t g = cfg.grid_knots;
        if (g == 0) throw InvalidSpec("sigma2_spearman: grid_knots must be positive");
        std::vector<double> knots(g);
        for (std::size_t i = 0; i < g; ++i) knots[i] = (static_cast<double>(i) + 0.5) / static_cast<double>(g);
        plug.tabulate(knots);
        const auto nodes = midpoint_nodes(p, g);
        const auto infos = plug.point_infos(0, nodes.points);
        double s = 0;
        for (std::size_t i = 0; i < infos.size(); ++i) {
            double row = 0;
            for (std::size_t j = 0; j < infos.size(); ++j) row += nodes.weights[j] * plug.terms(infos[i], infos[j]).total();
            s += nodes.weights[i] * row;
        }
        return s;
    }
    const auto nodes = sobol_nodes(2 * p, cfg.qmc_points, cfg.seed);
    std::vector<double> a(nodes.size() * p), b(nodes.size() * p);
    for (std::size_t r = 0; r < nodes.size(); ++r)
        for (std::size_t k = 0; k < p; ++k) {
            a[r * p + k] = nodes.point(r)[k];
            b[r * p + k] = nodes.point(r)[p + k];
        }
    const auto vals = plug.cov_pairs(a, b);
    double s = 0;
    for (std::size_t r = 0; r < nodes.size(); ++r) s += nodes.weights[r] * vals[r];
    return s;
}

double sigma2_spearman(const Dataset& data, std::span<const std::size_t> x_cols, std::span<const double> a,
                       const QuadratureConfig& cfg, CovOptions opts) {
    if (a.size() != x_cols.size()) throw InvalidSpec("sigma2_spearman: one threshold per x-column required");
    BoxSpec box{"lower_orthant", {}};
    for (std::size_t j = 0; j < x_cols.size(); ++j)
        box.bounds.push_back(BoxBound{ColumnRef::by_index(x_cols[j]), Bound::none(), Bound::at_value(a[j])});
    const auto ev = resolve_event(box, data);
    return sigma2_spearman(CondEmpCopula::fit(data, x_cols, ev), cfg, opts);
}

}  // namespace condcop
