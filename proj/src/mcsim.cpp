#include "condcop/mcsim.hpp"

#include "condcop/errors.hpp"
#include "condcop/normal.hpp"
#include "condcop/rng.hpp"
#include "condcop/stats.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/toms748_solve.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>

namespace condcop {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

template <class F>
double integrate(F&& f, double lo, double hi, double tol = 1e-10) {
    if (!(hi > lo)) return 0.0;
    return boost::math::quadrature::gauss_kronrod<double, 15>::integrate(f, lo, hi, 12, tol);
}

/// Lower Cholesky factor of a symmetric matrix; throws when not positive definite.
std::vector<double> cholesky(const std::vector<double>& A, std::size_t p) {
    std::vector<double> L(p * p, 0.0);
    for (std::size_t i = 0; i < p; ++i)
        for (std::size_t j = 0; j <= i; ++j) {
            double s = A[i * p + j];
            for (std::size_t k = 0; k < j; ++k) s -= L[i * p + k] * L[j * p + k];
            if (i == j) {
                if (!(s > 1e-12)) throw InvalidSpec("correlation matrix is not positive definite");
                L[i * p + i] = std::sqrt(s);
            } else {
                L[i * p + j] = s / L[j * p + j];
            }
        }
    return L;
}

double clayton_cdf(double theta, double u, double v) {
    if (u <= 0.0 || v <= 0.0) return 0.0;
    u = std::min(u, 1.0);
    v = std::min(v, 1.0);
    if (theta == 0.0) return u * v;
    return std::pow(std::pow(u, -theta) + std::pow(v, -theta) - 1.0, -1.0 / theta);
}

/// d/du C_theta(u, v).
double clayton_du(double theta, double u, double v) {
    if (v <= 0.0) return 0.0;
    v = std::min(v, 1.0);
    if (theta == 0.0) return v;
    if (u <= 0.0) return 1.0;
    u = std::min(u, 1.0);
    const double s = std::pow(u, -theta) + std::pow(v, -theta) - 1.0;
    return std::pow(u, -theta - 1.0) * std::pow(s, -1.0 / theta - 1.0);
}

/// int int d_u C_a(u,v) d_v C_b(u,v) du dv.
double cross_partial_integral(double theta_a, double theta_b) {
    auto inner = [&](double v) {
        return integrate([&](double u) { return clayton_du(theta_a, u, v) * clayton_du(theta_b, v, u); }, 0.0, 1.0);
    };
    return integrate(inner, 0.0, 1.0);
}

class IndependenceLaw final : public ConditionalLaw {
public:
    IndependenceLaw(std::size_t p, double pA) : p_(p), pA_(pA) {}
    std::size_t dim() const override { return p_; }
    double p_A() const override { return pA_; }
    double margin(std::size_t, double x) const override { return std::clamp(x, 0.0, 1.0); }
    double copula(std::span<const double> u) const override {
        double s = 1.0;
        for (double v : u) s *= std::clamp(v, 0.0, 1.0);
        return s;
    }
    double copula_partial(std::span<const double> u, std::size_t k) const override {
        double s = 1.0;
        for (std::size_t j = 0; j < u.size(); ++j)
            if (j != k) s *= std::clamp(u[j], 0.0, 1.0);
        return s;
    }
    double kendall() const override { return 0.0; }

private:
    std::size_t p_;
    double pA_;
};

class ClaytonMixtureLaw final : public ConditionalLaw {
public:
    ClaytonMixtureLaw(double w, double theta_in, double theta_out, double pA)
        : w_(w), tin_(theta_in), tout_(theta_out), pA_(pA) {}
    std::size_t dim() const override { return 2; }
    double p_A() const override { return pA_; }
    double margin(std::size_t, double x) const override { return std::clamp(x, 0.0, 1.0); }
    double copula(std::span<const double> u) const override {
        return w_ * clayton_cdf(tin_, u[0], u[1]) + (1 - w_) * clayton_cdf(tout_, u[0], u[1]);
    }
    double copula_partial(std::span<const double> u, std::size_t k) const override {
        const double a = u[k], b = u[1 - k];
        return w_ * clayton_du(tin_, a, b) + (1 - w_) * clayton_du(tout_, a, b);
    }
    double kendall() const override {
        // tau = 1 - 4 int int d_u C d_v C for the mixture, expanded bilinearly.
        const double ii = cross_partial_integral(tin_, tin_), oo = cross_partial_integral(tout_, tout_);
        const double io = cross_partial_integral(tin_, tout_), oi = cross_partial_integral(tout_, tin_);
        const double w = w_, v = 1 - w_;
        return 1.0 - 4.0 * (w * w * ii + v * v * oo + w * v * (io + oi));
    }

private:
    double w_, tin_, tout_, pA_;
};

/// X ~ N(0,R) with X | Z = z ~ N(mu z, R - mu mu'), Z standard normal restricted to [a, b].
class GaussianLaw final : public ConditionalLaw {
public:
    GaussianLaw(std::vector<double> R, std::size_t p, std::vector<double> mu, double a, double b)
        : R_(std::move(R)), p_(p), mu_(std::move(mu)), a_(a), b_(b) {
        ta_ = normal_cdf(a_);
        tb_ = normal_cdf(b_);
        pA_ = tb_ - ta_;
        if (!(pA_ > 0.0)) throw InvalidSpec("conditioning box has zero probability under the DGP");
        sigma_.resize(p_);
        for (std::size_t k = 0; k < p_; ++k) {
            const double v = 1.0 - mu_[k] * mu_[k];
            sigma_[k] = v > 1e-14 ? std::sqrt(v) : 0.0;
            if (sigma_[k] == 0.0) degenerate_ = static_cast<int>(k);
        }
        z_independent_ = std::all_of(mu_.begin(), mu_.end(), [](double m) { return m == 0.0; });
        if (p_ == 2 && degenerate_ < 0)
            rc_ = (R_[1] - mu_[0] * mu_[1]) / (sigma_[0] * sigma_[1]);
    }

    std::size_t dim() const override { return p_; }
    double p_A() const override { return pA_; }

    double margin(std::size_t k, double x) const override {
        if (z_independent_) return normal_cdf(x);
        if (static_cast<int>(k) == degenerate_)
            return std::max(0.0, normal_cdf(std::clamp(x, a_, b_)) - ta_) / pA_;
        if (std::isinf(x)) return x > 0 ? 1.0 : 0.0;
        return integrate([&](double t) { return normal_cdf((x - mu_[k] * z(t)) / sigma_[k]); }, ta_, tb_) / pA_;
    }

    double copula(std::span<const double> u) const override {
        require_pair();
        for (double v : u)
            if (v <= 0.0) return 0.0;
        if (u[0] >= 1.0) return std::min(u[1], 1.0);
        if (u[1] >= 1.0) return u[0];
        return joint(quantile(0, u[0]), quantile(1, u[1])) / pA_;
    }

    double copula_partial(std::span<const double> u, std::size_t k) const override {
        require_pair();
        const std::size_t l = 1 - k;
        if (u[l] <= 0.0) return 0.0;
        if (u[l] >= 1.0) return 1.0;
        const double uk = std::clamp(u[k], 1e-12, 1.0 - 1e-10);
        const double xk = quantile(k, uk), xl = quantile(l, u[l]);
        const double dens = density(k, xk);
        if (!(dens > 0.0)) return 0.0;
        return joint_dx(k, xk, xl) / (pA_ * dens);
    }

    double kendall() const override {
        require_pair();
        if (z_independent_) return 2.0 / std::numbers::pi * std::asin(R_[1]);
        // tau = 2 P(concordance) - 1 for two independent draws of the conditional law.
        auto conc = [&](double t1, double t2) {
            const double d = z(t1) - z(t2);
            if (degenerate_ >= 0) {
                const std::size_t k = 1 - static_cast<std::size_t>(degenerate_);
                return normal_cdf(mu_[k] * std::abs(d) / (std::numbers::sqrt2 * sigma_[k]));
            }
            const double h = mu_[0] * d / (std::numbers::sqrt2 * sigma_[0]);
            const double g = mu_[1] * d / (std::numbers::sqrt2 * sigma_[1]);
            return bivariate_normal_cdf(h, g, rc_) + bivariate_normal_cdf(-h, -g, rc_);
        };
        auto outer = [&](double t1) { return integrate([&](double t2) { return conc(t1, t2); }, ta_, tb_, 1e-9); };
        const double P = integrate(outer, ta_, tb_, 1e-9) / (pA_ * pA_);
        return 2.0 * P - 1.0;
    }

private:
    static double z(double t) { return normal_quantile(t); }

    void require_pair() const {
        if (p_ != 2) throw InvalidSpec("Gaussian conditional copula is available for p = 2 only");
    }

    double density(std::size_t k, double x) const {
        if (z_independent_) return normal_pdf(x);
        if (static_cast<int>(k) == degenerate_) return (x > a_ && x < b_) ? normal_pdf(x) / pA_ : 0.0;
        const double s = sigma_[k];
        return integrate([&](double t) { return normal_pdf((x - mu_[k] * z(t)) / s) / s; }, ta_, tb_) / pA_;
    }

    double quantile(std::size_t k, double u) const {
        if (z_independent_) return normal_quantile(u);
        if (static_cast<int>(k) == degenerate_) return normal_quantile(ta_ + u * pA_);
        auto f = [&](double x) { return margin(k, x) - u; };
        double lo = -8.0, hi = 8.0;
        while (f(lo) > 0.0 && lo > -60.0) lo *= 2.0;
        while (f(hi) < 0.0 && hi < 60.0) hi *= 2.0;
        boost::uintmax_t iters = 200;
        auto r = boost::math::tools::toms748_solve(f, lo, hi, boost::math::tools::eps_tolerance<double>(45), iters);
        return 0.5 * (r.first + r.second);
    }

    /// P(X1 <= x1, X2 <= x2, Z in A).
    double joint(double x1, double x2) const {
        if (z_independent_) return pA_ * bivariate_normal_cdf(x1, x2, R_[1]);
        if (degenerate_ >= 0) {
            const std::size_t j = static_cast<std::size_t>(degenerate_), k = 1 - j;
            const double xj = j == 0 ? x1 : x2, xk = j == 0 ? x2 : x1;
            const double top = normal_cdf(std::min(b_, xj));
            return integrate([&](double t) { return normal_cdf((xk - mu_[k] * z(t)) / sigma_[k]); }, ta_, top);
        }
        return integrate(
            [&](double t) {
                const double zz = z(t);
                return bivariate_normal_cdf((x1 - mu_[0] * zz) / sigma_[0], (x2 - mu_[1] * zz) / sigma_[1], rc_);
            },
            ta_, tb_);
    }

    /// d/dx_k of joint(x).
    double joint_dx(std::size_t k, double xk, double xl) const {
        const std::size_t l = 1 - k;
        if (z_independent_) {
            const double r = R_[1];
            return pA_ * normal_pdf(xk) * normal_cdf((xl - r * xk) / std::sqrt(1 - r * r));
        }
        if (degenerate_ >= 0) {
            const std::size_t j = static_cast<std::size_t>(degenerate_);
            if (k == j) {
                if (!(xk > a_ && xk < b_)) return 0.0;
                return normal_pdf(xk) * normal_cdf((xl - mu_[l] * xk) / sigma_[l]);
            }
            const double top = normal_cdf(std::min(b_, xl));
            return integrate([&](double t) { return normal_pdf((xk - mu_[k] * z(t)) / sigma_[k]) / sigma_[k]; }, ta_,
                             top);
        }
        const double sr = std::sqrt(1.0 - rc_ * rc_);
        return integrate(
            [&](double t) {
                const double zz = z(t);
                const double wk = (xk - mu_[k] * zz) / sigma_[k], wl = (xl - mu_[l] * zz) / sigma_[l];
                return normal_pdf(wk) / sigma_[k] * normal_cdf((wl - rc_ * wk) / sr);
            },
            ta_, tb_);
    }

    std::vector<double> R_;
    std::size_t p_;
    std::vector<double> mu_;
    std::vector<double> sigma_;
    double a_, b_, ta_ = 0, tb_ = 1, pA_ = 1, rc_ = 0;
    int degenerate_ = -1;
    bool z_independent_ = false;
};

/// Z-interval of a box, intersected over bounds on column `col`; other columns rejected.
std::pair<double, double> z_interval(std::span<const ResolvedBound> box, std::size_t col, double lo, double hi) {
    for (const auto& b : box) {
        if (b.col != col) throw InvalidSpec("conditional laws are available for boxes on Z columns only");
        lo = std::max(lo, b.lower);
        hi = std::min(hi, b.upper);
    }
    return {lo, hi};
}

std::uint64_t rep_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
    return stream_seed(stream_seed(seed, a), b);
}

}  // namespace

// -- DGP ----------------------------------------------------------------------------------

DGPSpec DGPSpec::independence(std::size_t p, std::size_t q, std::size_t n, std::uint64_t seed) {
    DGPSpec d;
    d.kind = DGPKind::IndependenceAll;
    d.p = p;
    d.q = q;
    d.n = n;
    d.seed = seed;
    return d;
}

DGPSpec DGPSpec::gaussian(double rho, ZLink link, double rho_z, std::size_t n, std::uint64_t seed) {
    return gaussian({1.0, rho, rho, 1.0}, 2, link, rho_z, n, seed);
}

DGPSpec DGPSpec::gaussian(std::vector<double> R, std::size_t p, ZLink link, double rho_z, std::size_t n,
                          std::uint64_t seed) {
    DGPSpec d;
    d.kind = DGPKind::GaussianCopula;
    d.p = p;
    d.q = 1;
    d.R = std::move(R);
    d.link = link;
    d.rho_z = rho_z;
    d.n = n;
    d.seed = seed;
    return d;
}

DGPSpec DGPSpec::clayton(double theta_in, double theta_out, double regime_lo, double regime_hi, std::size_t n,
                         std::uint64_t seed) {
    DGPSpec d;
    d.kind = DGPKind::ClaytonPair;
    d.p = 2;
    d.q = 1;
    d.theta_in = theta_in;
    d.theta_out = theta_out;
    d.regime_lo = regime_lo;
    d.regime_hi = regime_hi;
    d.n = n;
    d.seed = seed;
    return d;
}

double DGPSpec::link_strength() const {
    switch (link) {
        case ZLink::Independent: return 0.0;
        case ZLink::ZIsX: return 1.0;
        case ZLink::ZCorrelated: return rho_z;
    }
    return 0.0;
}

void DGPSpec::validate() const {
    if (p == 0) throw InvalidSpec("DGP needs at least one X column");
    if (n == 0) throw InvalidSpec("DGP sample size must be positive");
    switch (kind) {
        case DGPKind::IndependenceAll:
            if (q == 0) throw InvalidSpec("independence DGP needs at least one Z column");
            break;
        case DGPKind::GaussianCopula: {
            if (q != 1) throw InvalidSpec("Gaussian DGP has exactly one Z column");
            if (R.size() != p * p) throw InvalidSpec("correlation matrix must be p x p");
            for (std::size_t i = 0; i < p; ++i) {
                if (std::abs(R[i * p + i] - 1.0) > 1e-12) throw InvalidSpec("correlation matrix needs a unit diagonal");
                for (std::size_t j = 0; j < i; ++j)
                    if (R[i * p + j] != R[j * p + i]) throw InvalidSpec("correlation matrix must be symmetric");
            }
            cholesky(R, p);
            if (z_source >= p) throw InvalidSpec("Z link refers to a missing X component");
            if (link == ZLink::ZCorrelated && !(rho_z > -1.0 && rho_z < 1.0))
                throw InvalidSpec("Z correlation must lie in (-1, 1)");
            break;
        }
        case DGPKind::ClaytonPair:
            if (p != 2 || q != 1) throw InvalidSpec("Clayton DGP is a pair with one Z column");
            if (!(theta_in >= 0.0) || !(theta_out >= 0.0)) throw InvalidSpec("Clayton theta must be nonnegative");
            if (!(regime_lo >= 0.0 && regime_lo <= regime_hi && regime_hi <= 1.0))
                throw InvalidSpec("Clayton regime box must lie in [0,1]");
            break;
    }
}

std::vector<std::size_t> DGPSpec::x_cols() const {
    std::vector<std::size_t> x(p);
    std::iota(x.begin(), x.end(), 0);
    return x;
}

Dataset simulate(const DGPSpec& dgp) { return simulate(dgp, dgp.n, dgp.seed); }

Dataset simulate(const DGPSpec& dgp, std::size_t n, std::uint64_t seed) {
    dgp.validate();
    const std::size_t p = dgp.p, q = dgp.q;
    std::vector<std::vector<double>> cols(p + q, std::vector<double>(n));
    std::vector<std::string> names;
    for (std::size_t k = 0; k < p; ++k) names.push_back("X" + std::to_string(k + 1));
    for (std::size_t j = 0; j < q; ++j) names.push_back("Z" + std::to_string(j + 1));
    Rng rng = make_stream(seed, 0);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    std::normal_distribution<double> N;
    switch (dgp.kind) {
        case DGPKind::IndependenceAll:
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t c = 0; c < p + q; ++c) cols[c][i] = U(rng);
            break;
        case DGPKind::GaussianCopula: {
            const auto L = cholesky(dgp.R, p);
            const double rz = dgp.link_strength();
            std::vector<double> e(p);
            for (std::size_t i = 0; i < n; ++i) {
                for (auto& v : e) v = N(rng);
                for (std::size_t k = 0; k < p; ++k) {
                    double s = 0;
                    for (std::size_t j = 0; j <= k; ++j) s += L[k * p + j] * e[j];
                    cols[k][i] = s;
                }
                const double eta = N(rng);
                cols[p][i] = rz == 1.0 ? cols[dgp.z_source][i]
                                       : rz * cols[dgp.z_source][i] + std::sqrt(1.0 - rz * rz) * eta;
            }
            break;
        }
        case DGPKind::ClaytonPair:
            for (std::size_t i = 0; i < n; ++i) {
                const double z = U(rng);
                const double theta = (z >= dgp.regime_lo && z <= dgp.regime_hi) ? dgp.theta_in : dgp.theta_out;
                const double u = U(rng), w = U(rng);
                double v = w;
                if (theta > 0.0)
                    v = std::pow((std::pow(w, -theta / (1.0 + theta)) - 1.0) * std::pow(u, -theta) + 1.0, -1.0 / theta);
                cols[0][i] = u;
                cols[1][i] = v;
                cols[2][i] = z;
            }
            break;
    }
    return Dataset(names, cols);
}

BoxSpec population_quantile_box(const DGPSpec& dgp, double lo, double hi, std::size_t j, std::string name) {
    if (!(lo >= 0.0 && lo < hi && hi <= 1.0)) throw InvalidSpec("population box levels must satisfy 0 <= lo < hi <= 1");
    if (j >= dgp.q) throw InvalidSpec("population box on a missing Z column");
    const bool normal = dgp.kind == DGPKind::GaussianCopula;
    auto value = [&](double level) { return normal ? normal_quantile(level) : level; };
    BoxBound b{ColumnRef::by_index(dgp.z_col(j)), lo == 0.0 ? Bound::none() : Bound::at_value(value(lo)),
               hi == 1.0 ? Bound::none() : Bound::at_value(value(hi))};
    if (name.empty()) name = "Z" + std::to_string(j + 1) + "_" + std::to_string(lo) + "_" + std::to_string(hi);
    return BoxSpec{name, {b}};
}

std::shared_ptr<const ConditionalLaw> conditional_law(const DGPSpec& dgp, std::span<const ResolvedBound> box) {
    dgp.validate();
    switch (dgp.kind) {
        case DGPKind::IndependenceAll: {
            for (const auto& b : box)
                if (b.col < dgp.p || b.col >= dgp.p + dgp.q)
                    throw InvalidSpec("conditional laws are available for boxes on Z columns only");
            double pA = 1.0;
            for (std::size_t j = 0; j < dgp.q; ++j) {
                std::vector<ResolvedBound> mine;
                for (const auto& b : box)
                    if (b.col == dgp.z_col(j)) mine.push_back(b);
                auto [lo, hi] = z_interval(mine, dgp.z_col(j), 0.0, 1.0);
                pA *= std::max(0.0, hi - lo);
            }
            if (!(pA > 0.0)) throw InvalidSpec("conditioning box has zero probability under the DGP");
            return std::make_shared<IndependenceLaw>(dgp.p, pA);
        }
        case DGPKind::GaussianCopula: {
            auto [a, b] = z_interval(box, dgp.z_col(), -kInf, kInf);
            const double rz = dgp.link_strength();
            std::vector<double> mu(dgp.p);
            for (std::size_t k = 0; k < dgp.p; ++k) mu[k] = rz * dgp.R[k * dgp.p + dgp.z_source];
            return std::make_shared<GaussianLaw>(dgp.R, dgp.p, mu, a, b);
        }
        case DGPKind::ClaytonPair: {
            auto [a, b] = z_interval(box, dgp.z_col(), 0.0, 1.0);
            const double len = b - a;
            if (!(len > 0.0)) throw InvalidSpec("conditioning box has zero probability under the DGP");
            const double inside = std::max(0.0, std::min(b, dgp.regime_hi) - std::max(a, dgp.regime_lo));
            return std::make_shared<ClaytonMixtureLaw>(inside / len, dgp.theta_in, dgp.theta_out, len);
        }
    }
    throw InvalidSpec("unknown DGP kind");
}

std::shared_ptr<const ConditionalLaw> conditional_law(const DGPSpec& dgp, const BoxSpec& box) {
    std::vector<ResolvedBound> rb;
    for (const auto& b : box.bounds) {
        if (b.lower.kind == BoundKind::Quantile || b.upper.kind == BoundKind::Quantile)
            throw InvalidSpec("conditional law of '" + box.name + "': quantile bounds need data; use value bounds");
        ResolvedBound r;
        if (!b.col.index) throw InvalidSpec("conditional law of '" + box.name + "': columns must be given by index");
        r.col = *b.col.index;
        r.lower = b.lower.kind == BoundKind::Value ? b.lower.value : -kInf;
        r.upper = b.upper.kind == BoundKind::Value ? b.upper.value : kInf;
        rb.push_back(r);
    }
    return conditional_law(dgp, rb);
}

OracleSample simulate_oracle(const DGPSpec& dgp, std::span<const BoxSpec> events) {
    return simulate_oracle(dgp, events, dgp.n, dgp.seed);
}

OracleSample simulate_oracle(const DGPSpec& dgp, std::span<const BoxSpec> events, std::size_t n,
                             std::uint64_t seed) {
    OracleSample s{simulate(dgp, n, seed), {}, {}, {}};
    for (const auto& box : events) {
        auto ev = resolve_event(box, s.data);
        auto law = conditional_law(dgp, ev.box);
        std::vector<double> U(ev.n_A * dgp.p);
        for (std::size_t m = 0; m < ev.n_A; ++m)
            for (std::size_t k = 0; k < dgp.p; ++k) U[m * dgp.p + k] = law->margin(k, s.data.at(ev.members[m], k));
        s.events.push_back(std::move(ev));
        s.laws.push_back(std::move(law));
        s.true_U_A.push_back(std::move(U));
    }
    return s;
}

// -- oracle processes ---------------------------------------------------------------------

DerivativeTable derivative_table(const ConditionalLaw& law, std::size_t g) {
    DerivativeTable t;
    t.g = g;
    t.p = law.dim();
    t.p_A = law.p_A();
    GridEval mesh;
    mesh.knots.assign(t.p, GridEval::uniform_knots(g));
    const std::size_t m = mesh.size();
    t.values.resize(m * t.p);
    for (std::size_t f = 0; f < m; ++f) {
        const auto u = mesh.point(f);
        for (std::size_t k = 0; k < t.p; ++k) t.values[f * t.p + k] = law.D_partial(u, k);
    }
    return t;
}

namespace {

/// Counts #{rows : U_row <= u} on uniform_knots(g)^p through a histogram and prefix sums.
std::vector<double> grid_counts(std::span<const double> U, std::size_t p, std::size_t g) {
    std::size_t m = 1;
    for (std::size_t k = 0; k < p; ++k) m *= g;
    std::vector<double> h(m, 0.0);
    const std::size_t rows = p ? U.size() / p : 0;
    const double gd = static_cast<double>(g);
    for (std::size_t r = 0; r < rows; ++r) {
        std::size_t flat = 0;
        for (std::size_t k = 0; k < p; ++k) {
            const double u = U[r * p + k];
            // smallest j in 1..g with u <= j/g
            std::size_t j = static_cast<std::size_t>(std::max(1.0, std::ceil(u * gd)));
            j = std::min(j, g);
            while (j > 1 && u <= static_cast<double>(j - 1) / gd) --j;
            while (j < g && u > static_cast<double>(j) / gd) ++j;
            flat = flat * g + (j - 1);
        }
        h[flat] += 1.0;
    }
    std::size_t stride = 1;
    for (std::size_t k = p; k-- > 0;) {
        for (std::size_t f = 0; f < m; ++f)
            if ((f / stride) % g != 0) h[f] += h[f - stride];
        stride *= g;
    }
    return h;
}

}  // namespace

double process_distance(const CondEmpCopula& cop, std::span<const double> true_U, const DerivativeTable& dD) {
    const std::size_t p = cop.dim(), g = dD.g;
    if (dD.p != p) throw InvalidSpec("process_distance: derivative table dimension mismatch");
    if (true_U.size() != cop.n_A() * p) throw InvalidSpec("process_distance: oracle sample size mismatch");
    const double n = static_cast<double>(cop.n()), rn = std::sqrt(n);
    const auto knots = GridEval::uniform_knots(g);
    const auto bar = cop.eval_bar_grid(std::vector<std::vector<double>>(p, knots));
    const auto Dn = grid_counts(true_U, p, g);
    const std::size_t m = bar.size();
    const double Dn1 = Dn[m - 1] / n;
    std::vector<std::size_t> idx(p);
    double worst = 0.0;
    for (std::size_t f = 0; f < m; ++f) {
        std::size_t rem = f;
        for (std::size_t k = p; k-- > 0;) {
            idx[k] = rem % g;
            rem /= g;
        }
        double corr = 0.0;
        for (std::size_t k = 0; k < p; ++k) {
            // flat index of (u_k, 1_{-k})
            std::size_t mf = 0;
            for (std::size_t j = 0; j < p; ++j) mf = mf * g + (j == k ? idx[k] : g - 1);
            const double uk = knots[idx[k]];
            corr += dD.values[f * p + k] * rn * (Dn[mf] / n - uk * Dn1);
        }
        const double d = rn * (cop.p_hat() * bar.values[f] - Dn[f] / n) + corr / dD.p_A;
        worst = std::max(worst, std::abs(d));
    }
    return worst;
}

double process_distance(const OracleSample& sample, std::size_t event, std::size_t g) {
    if (event >= sample.events.size()) throw InvalidSpec("process_distance: event index out of range");
    const auto& ev = sample.events[event];
    const auto& law = *sample.laws[event];
    std::vector<std::size_t> x(law.dim());
    std::iota(x.begin(), x.end(), 0);
    const auto cop = CondEmpCopula::fit(sample.data, x, ev);
    return process_distance(cop, sample.true_U_A[event], derivative_table(law, g));
}

GridEval copula_table(const ConditionalLaw& law, std::size_t g) {
    GridEval t;
    t.knots.assign(law.dim(), GridEval::uniform_knots(g));
    t.values.resize(t.size());
    for (std::size_t f = 0; f < t.size(); ++f) t.values[f] = law.copula(t.point(f));
    return t;
}

double copula_sup_error(const CondEmpCopula& cop, const GridEval& truth) {
    const auto est = cop.eval_hat_grid(truth.knots);
    double worst = 0.0;
    for (std::size_t f = 0; f < est.size(); ++f) worst = std::max(worst, std::abs(est.values[f] - truth.values[f]));
    return worst;
}

double copula_sup_error(const CondEmpCopula& cop, const ConditionalLaw& law, std::size_t g) {
    return copula_sup_error(cop, copula_table(law, g));
}

bool empirical_invariants_hold(const CondEmpCopula& cop, std::size_t g) {
    const std::size_t p = cop.dim();
    const std::vector<std::vector<double>> knots(p, GridEval::uniform_knots(g));
    const auto hat = cop.eval_hat_grid(knots), bar = cop.eval_bar_grid(knots);
    const double bound = static_cast<double>(p) / (static_cast<double>(cop.n_A()) * cop.p_hat());
    for (std::size_t f = 0; f < hat.size(); ++f)
        if (std::abs(hat.values[f] - bar.values[f]) > bound + 1e-12) return false;
    std::vector<double> pts;
    for (std::size_t f = 0; f < hat.size(); ++f) {
        const auto u = hat.point(f);
        pts.insert(pts.end(), u.begin(), u.end());
    }
    for (double d : cop.partial_derivative_many(pts))
        if (std::abs(d) > 5.0) return false;
    return true;
}

double true_measure(const ConditionalLaw& law, const MeasureSpec& spec) {
    const std::size_t p = law.dim();
    std::vector<std::size_t> all(p);
    std::iota(all.begin(), all.end(), 0);
    const auto kind = spec.psi.kind();
    if (p == 2 && kind == PsiKind::Constant1 && spec.K == all && spec.K_prime == all)
        return spec.report((law.kendall() + 1.0) / 4.0);
    if (kind == PsiKind::Blomqvist && spec.K.empty() && spec.K_prime == all) {
        std::vector<double> half(p, 0.5);
        return spec.report(law.copula(half));
    }
    throw InvalidSpec("true value of measure '" + spec.label + "' is not available under this DGP");
}

// -- studies ------------------------------------------------------------------------------

ConvergenceReport convergence_study(const DGPSpec& dgp, const BoxSpec& event, std::span<const std::size_t> ns,
                                    std::size_t reps, std::size_t grid) {
    ConvergenceReport rep;
    rep.ns.assign(ns.begin(), ns.end());
    rep.reps = reps;
    const auto law = conditional_law(dgp, event);
    const auto dD = derivative_table(*law, grid);
    const auto truth = copula_table(*law, grid);
    const auto x = dgp.x_cols();
    std::vector<std::vector<double>> dist(ns.size()), cerr(ns.size());
    const std::vector<BoxSpec> one{event};
    for (std::size_t a = 0; a < ns.size(); ++a)
        for (std::size_t r = 0; r < reps; ++r) {
            auto s = simulate_oracle(dgp, one, ns[a], rep_seed(dgp.seed, ns[a], r));
            const auto cop = CondEmpCopula::fit(s.data, x, s.events[0]);
            dist[a].push_back(process_distance(cop, s.true_U_A[0], dD));
            cerr[a].push_back(copula_sup_error(cop, truth));
            if (!empirical_invariants_hold(cop, grid)) ++rep.invariant_failures;
        }
    for (std::size_t a = 0; a < ns.size(); ++a) {
        rep.median_distance.push_back(median(dist[a]));
        rep.median_copula_error.push_back(median(cerr[a]));
    }
    rep.distance_strictly_decreasing = rep.copula_error_strictly_decreasing = true;
    for (std::size_t a = 1; a < ns.size(); ++a) {
        rep.distance_strictly_decreasing &= rep.median_distance[a] < rep.median_distance[a - 1];
        rep.copula_error_strictly_decreasing &= rep.median_copula_error[a] < rep.median_copula_error[a - 1];
    }
    if (!ns.empty())
        for (std::size_t r = 0; r < reps; ++r) rep.paired_improvements += dist.back()[r] < dist.front()[r];
    return rep;
}

CoverageReport coverage_study(const DGPSpec& dgp, const BoxSpec& event, const MeasureSpec& spec,
                              const BootstrapConfig& cfg, double level, std::size_t reps) {
    CoverageReport rep;
    rep.level = level;
    rep.reps = reps;
    const auto law = conditional_law(dgp, event);
    rep.true_value = true_measure(*law, spec);
    const auto x = dgp.x_cols();
    const std::vector<MeasureSpec> specs{spec};
    double width = 0.0;
    for (std::size_t r = 0; r < reps; ++r) {
        const auto data = simulate(dgp, dgp.n, rep_seed(dgp.seed, 0xC0, r));
        const std::vector<ResolvedEvent> ev{resolve_event(event, data)};
        const double est = estimate_rho(CondEmpCopula::fit(data, x, ev[0]), spec, cfg.quadrature).estimate;
        BootstrapConfig c = cfg;
        c.scheme.seed = rep_seed(cfg.scheme.seed, 0xC1, r);
        const auto draws = boot_measures(data, x, ev, specs, c);
        const auto [lo, hi] = percentile_ci(est, draws.column(0), data.rows(), level);
        rep.covered += lo <= rep.true_value && rep.true_value <= hi;
        width += hi - lo;
    }
    rep.coverage = reps ? static_cast<double>(rep.covered) / static_cast<double>(reps) : 0.0;
    rep.std_error = reps ? std::sqrt(rep.coverage * (1 - rep.coverage) / static_cast<double>(reps)) : 0.0;
    rep.mean_width = reps ? width / static_cast<double>(reps) : 0.0;
    return rep;
}

ValidityReport bootstrap_validity_study(const DGPSpec& dgp, const BoxSpec& event, const MeasureSpec& spec,
                                        const BootstrapConfig& cfg, std::size_t mc_reps) {
    ValidityReport rep;
    rep.M = cfg.M;
    rep.mc_reps = mc_reps;
    const auto law = conditional_law(dgp, event);
    rep.true_value = true_measure(*law, spec);
    const auto x = dgp.x_cols();
    const double rn = std::sqrt(static_cast<double>(dgp.n));
    std::vector<double> mc;
    for (std::size_t r = 0; r < mc_reps; ++r) {
        const auto data = simulate(dgp, dgp.n, rep_seed(dgp.seed, 0xD0, r));
        const auto ev = resolve_event(event, data);
        mc.push_back(rn * (estimate_rho(CondEmpCopula::fit(data, x, ev), spec, cfg.quadrature).estimate - rep.true_value));
    }
    const auto data = simulate(dgp, dgp.n, rep_seed(dgp.seed, 0xD1, 0));
    const std::vector<ResolvedEvent> ev{resolve_event(event, data)};
    const std::vector<MeasureSpec> specs{spec};
    const auto boot = boot_measures(data, x, ev, specs, cfg).column(0);
    rep.kolmogorov_distance = ks_distance(boot, mc);
    rep.boot_sd = std::sqrt(variance(boot));
    rep.mc_sd = std::sqrt(variance(mc));
    rep.boot_mean = mean(boot);
    rep.mc_mean = mean(mc);
    auto centred = [](std::vector<double> v, double m) {
        for (auto& x : v) x -= m;
        return v;
    };
    rep.centred_distance = ks_distance(centred(boot, rep.boot_mean), centred(mc, rep.mc_mean));
    return rep;
}

RejectionReport rejection_study(const DGPSpec& dgp, std::span<const BoxSpec> events, const MeasureSpec& spec,
                                const BootstrapConfig& cfg, double alpha, std::size_t reps) {
    RejectionReport rep;
    rep.kinds = {StatKind::CvM, StatKind::KS};
    rep.rejections.assign(rep.kinds.size(), 0);
    rep.reps = reps;
    rep.alpha = alpha;
    const auto x = dgp.x_cols();
    for (std::size_t r = 0; r < reps; ++r) {
        const auto data = simulate(dgp, dgp.n, rep_seed(dgp.seed, 0xE0, r));
        const auto ev = resolve_family(events, data);
        BootstrapConfig c = cfg;
        c.scheme.seed = rep_seed(cfg.scheme.seed, 0xE1, r);
        const auto res = test_equality_kinds(data, x, ev, spec, rep.kinds, c);
        for (std::size_t k = 0; k < res.size(); ++k) rep.rejections[k] += res[k].p_value <= alpha;
    }
    for (auto c : rep.rejections) rep.rejection_rate.push_back(reps ? static_cast<double>(c) / reps : 0.0);
    return rep;
}

CovarianceReport covariance_study(const DGPSpec& dgp, const BoxSpec& event, std::span<const double> points,
                                  const BootstrapConfig& cfg, double threshold, double tolerance) {
    const std::size_t p = dgp.p;
    if (points.size() % p != 0) throw InvalidSpec("covariance_study: point array size not a multiple of p");
    const std::size_t m = points.size() / p;
    const auto data = simulate(dgp);
    const auto ev = resolve_event(event, data);
    const auto x = dgp.x_cols();
    const auto cop = CondEmpCopula::fit(data, x, ev);

    CovarianceReport rep;
    rep.points = m;
    rep.plugin = CovPlugin(cop).cov_matrix(points, points);

    std::vector<InfluenceVector> ivs;
    for (std::size_t i = 0; i < m; ++i) {
        PointFunctional f;
        f.dim = p;
        f.add(points.subspan(i * p, p), 1.0);
        ivs.push_back(influence_vector(cop, f));
    }
    const auto draws = draw_linear(ivs, cfg.scheme, cfg.M);
    std::vector<double> mean(m, 0.0);
    for (std::size_t r = 0; r < draws.M; ++r)
        for (std::size_t i = 0; i < m; ++i) mean[i] += draws.at(r, i) / static_cast<double>(draws.M);
    rep.bootstrap.assign(m * m, 0.0);
    for (std::size_t r = 0; r < draws.M; ++r)
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < m; ++j)
                rep.bootstrap[i * m + j] += (draws.at(r, i) - mean[i]) * (draws.at(r, j) - mean[j]);
    for (auto& v : rep.bootstrap) v /= static_cast<double>(draws.M - 1);

    std::vector<double> rel;
    for (std::size_t e = 0; e < m * m; ++e) {
        rep.max_abs_error = std::max(rep.max_abs_error, std::abs(rep.plugin[e] - rep.bootstrap[e]));
        if (std::abs(rep.plugin[e]) <= threshold) continue;
        const double re = std::abs(rep.bootstrap[e] - rep.plugin[e]) / std::abs(rep.plugin[e]);
        rel.push_back(re);
        rep.within_tolerance += re <= tolerance;
    }
    rep.compared = rel.size();
    if (!rel.empty()) {
        rep.max_relative_error = *std::max_element(rel.begin(), rel.end());
        rep.median_relative_error = median(rel);
    }
    return rep;
}

}  // namespace condcop
