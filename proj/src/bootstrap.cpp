#include "condcop/bootstrap.hpp"

#include "condcop/errors.hpp"
#include "condcop/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace condcop {

WeightScheme WeightScheme::multinomial(std::uint64_t seed) {
    WeightScheme s;
    s.kind = WeightKind::Multinomial;
    s.seed = seed;
    return s;
}

WeightScheme WeightScheme::multiplier(std::uint64_t seed, MultiplierDist dist) {
    WeightScheme s;
    s.kind = WeightKind::Multiplier;
    s.dist = dist;
    s.seed = seed;
    return s;
}

WeightScheme WeightScheme::dirichlet(std::uint64_t seed) {
    WeightScheme s;
    s.kind = WeightKind::Dirichlet;
    s.seed = seed;
    return s;
}

std::string WeightScheme::name() const {
    switch (kind) {
        case WeightKind::Multinomial: return "multinomial";
        case WeightKind::Dirichlet: return "dirichlet";
        case WeightKind::Multiplier:
            switch (dist) {
                case MultiplierDist::StandardNormal: return "multiplier-normal";
                case MultiplierDist::Rademacher: return "multiplier-rademacher";
                case MultiplierDist::User: return "multiplier-user";
            }
    }
    return "?";
}

std::vector<double> gen_weights(const WeightScheme& scheme, std::size_t n, Rng& rng) {
    if (n == 0) throw InvalidSpec("weights for an empty sample");
    std::vector<double> w(n, 0.0);
    switch (scheme.kind) {
        case WeightKind::Multinomial: {
            std::uniform_int_distribution<std::size_t> pick(0, n - 1);
            for (std::size_t i = 0; i < n; ++i) w[pick(rng)] += 1.0;
            break;
        }
        case WeightKind::Dirichlet: {
            std::exponential_distribution<double> ex(1.0);
            double s = 0.0;
            for (auto& v : w) s += (v = ex(rng));
            for (auto& v : w) v *= static_cast<double>(n) / s;
            break;
        }
        case WeightKind::Multiplier:
            switch (scheme.dist) {
                case MultiplierDist::StandardNormal: {
                    std::normal_distribution<double> nd;
                    for (auto& v : w) v = nd(rng);
                    break;
                }
                case MultiplierDist::Rademacher: {
                    std::bernoulli_distribution b(0.5);
                    for (auto& v : w) v = b(rng) ? 1.0 : -1.0;
                    break;
                }
                case MultiplierDist::User:
                    if (!scheme.user) throw InvalidSpec("user multiplier without a generator");
                    for (auto& v : w) v = scheme.user(rng);
                    break;
            }
            break;
    }
    return w;
}

std::vector<double> gen_weights(const WeightScheme& scheme, std::size_t n, std::uint64_t index) {
    Rng rng = make_stream(scheme.seed, index);
    return gen_weights(scheme, n, rng);
}

namespace {

void check_weights(const CondEmpCopula& cop, std::span<const double> w) {
    if (w.size() != cop.n()) throw InvalidSpec("weight vector length differs from the sample size");
}

double dstar_impl(const CondEmpCopula& cop, std::span<const double> w, double wbar, std::span<const double> u) {
    const std::size_t p = cop.dim();
    std::vector<int> t(p);
    for (std::size_t k = 0; k < p; ++k) t[k] = cop.bar_threshold(u[k]);
    double s = 0.0;
    for (std::size_t i = 0; i < cop.n_A(); ++i) {
        bool in = true;
        for (std::size_t k = 0; k < p && in; ++k) in = cop.rank_min(i, k) <= t[k];
        if (in) s += w[cop.row(i)];
    }
    const double n = static_cast<double>(cop.n());
    return s / std::sqrt(n) - std::sqrt(n) * wbar * cop.eval_D_bar(u);
}

double dtilde_impl(const CondEmpCopula& cop, std::span<const double> w, double wbar, std::span<const double> u) {
    const std::size_t p = cop.dim();
    const std::vector<double> one(p, 1.0);
    const double d1 = dstar_impl(cop, w, wbar, one);
    double corr = 0.0;
    std::vector<double> margin(p, 1.0);
    for (std::size_t k = 0; k < p; ++k) {
        margin[k] = u[k];
        corr += cop.partial_derivative_hat(u, k) * (dstar_impl(cop, w, wbar, margin) - u[k] * d1);
        margin[k] = 1.0;
    }
    return dstar_impl(cop, w, wbar, u) - corr / cop.p_hat();
}

}  // namespace

double boot_process_Dstar(const CondEmpCopula& cop, std::span<const double> weights, std::span<const double> u) {
    check_weights(cop, weights);
    return dstar_impl(cop, weights, mean(weights), u);
}

double boot_process_Dtilde(const CondEmpCopula& cop, std::span<const double> weights, std::span<const double> u) {
    check_weights(cop, weights);
    return dtilde_impl(cop, weights, mean(weights), u);
}

double boot_process_Ctilde(const CondEmpCopula& cop, std::span<const double> weights, std::span<const double> u) {
    check_weights(cop, weights);
    const double wbar = mean(weights);
    const std::vector<double> one(cop.dim(), 1.0);
    const double ph = cop.p_hat();
    return dtilde_impl(cop, weights, wbar, u) / ph -
           cop.eval_D_bar(u) * dtilde_impl(cop, weights, wbar, one) / (ph * ph);
}

std::vector<std::size_t> resample_indices(std::size_t n, Rng& rng) {
    if (n == 0) throw InvalidSpec("resample of an empty dataset");
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    std::vector<std::size_t> idx(n);
    for (auto& i : idx) i = pick(rng);
    return idx;
}

Dataset resample_nonparametric(const Dataset& data, Rng& rng) {
    const auto idx = resample_indices(data.rows(), rng);
    return data.select_rows(idx);
}

double InfluenceVector::apply(std::span<const double> weights, double weight_sum) const {
    double s = 0.0;
    for (std::size_t j = 0; j < rows.size(); ++j) s += weights[rows[j]] * coefs[j];
    return (s - constant * weight_sum) / std::sqrt(static_cast<double>(n));
}

double InfluenceVector::apply(std::span<const double> weights) const {
    return apply(weights, std::accumulate(weights.begin(), weights.end(), 0.0));
}

InfluenceVector influence_vector(const CondEmpCopula& cop, const PointFunctional& f) {
    const std::size_t p = cop.dim();
    if (f.dim != p) throw InvalidSpec("functional dimension differs from the copula dimension");
    const double ph = cop.p_hat();
    const std::size_t Q = f.size();
    const auto dbar = cop.eval_D_bar_many(f.points);
    const auto deriv = cop.partial_derivative_many(f.points);

    // Points at which D* enters, with their coefficients.
    IntPoints ys(p);
    std::vector<double> yflat, b;
    std::vector<int> t(p);
    double b_one = 0.0;
    auto push = [&](const double* y, double coef) {
        for (std::size_t k = 0; k < p; ++k) t[k] = cop.bar_threshold(y[k]);
        ys.push_back(t);
        yflat.insert(yflat.end(), y, y + p);
        b.push_back(coef);
    };
    std::vector<double> margin(p, 1.0);
    for (std::size_t q = 0; q < Q; ++q) {
        const double c = f.coefs[q];
        const double* x = f.points.data() + q * p;
        push(x, c / ph);
        double one_coef = -dbar[q];
        for (std::size_t k = 0; k < p; ++k) {
            if (x[k] >= 1.0) continue;
            const double dk = deriv[q * p + k];
            if (dk == 0.0) continue;
            margin[k] = x[k];
            push(margin.data(), -c * dk / (ph * ph));
            margin[k] = 1.0;
            one_coef += dk * x[k];
        }
        b_one += c * one_coef / (ph * ph);
    }
    const auto g = dominating_weight(cop.rank_min_points(), ys, b);
    const auto dy = cop.eval_D_bar_many(yflat);

    InfluenceVector iv;
    iv.n = cop.n();
    iv.rows = cop.event().members;
    iv.coefs.resize(cop.n_A());
    for (std::size_t s = 0; s < cop.n_A(); ++s) iv.coefs[s] = g[s] + b_one;
    double B = b_one * ph;
    for (std::size_t j = 0; j < b.size(); ++j) B += b[j] * dy[j];
    iv.constant = B;
    return iv;
}

std::vector<double> BootstrapDraws::column(std::size_t j) const {
    std::vector<double> c(M);
    for (std::size_t r = 0; r < M; ++r) c[r] = at(r, j);
    return c;
}

BootstrapDraws draw_linear(std::span<const InfluenceVector> functionals, const WeightScheme& scheme,
                           std::size_t M) {
    if (M == 0) throw InvalidSpec("bootstrap needs M >= 1");
    if (functionals.empty()) throw InvalidSpec("no statistic to bootstrap");
    const std::size_t n = functionals.front().n;
    for (const auto& f : functionals)
        if (f.n != n) throw InvalidSpec("influence vectors built on different samples");
    BootstrapDraws d;
    d.M = d.attempted = M;
    d.dim = functionals.size();
    d.scheme = scheme.name();
    d.replicates.resize(M * d.dim);
    for (std::size_t r = 0; r < M; ++r) {
        const auto w = gen_weights(scheme, n, r);
        const double ws = std::accumulate(w.begin(), w.end(), 0.0);
        for (std::size_t j = 0; j < d.dim; ++j) d.replicates[r * d.dim + j] = functionals[j].apply(w, ws);
    }
    return d;
}

BootstrapDraws boot_resample(const Dataset& data,
                             const std::function<std::vector<double>(const Dataset&)>& statistic,
                             std::size_t M, std::uint64_t seed, double max_failure_rate) {
    if (M == 0) throw InvalidSpec("bootstrap needs M >= 1");
    const auto base = statistic(data);
    const double sn = std::sqrt(static_cast<double>(data.rows()));
    BootstrapDraws d;
    d.dim = base.size();
    d.scheme = "nonparametric";
    for (std::size_t r = 0; r < M; ++r) {
        Rng rng = make_stream(seed, r);
        const auto star = data.select_rows(resample_indices(data.rows(), rng));
        ++d.attempted;
        try {
            const auto v = statistic(star);
            for (std::size_t j = 0; j < d.dim; ++j) d.replicates.push_back(sn * (v[j] - base[j]));
            ++d.M;
        } catch (const Error&) {
            ++d.failed;
        }
    }
    if (d.failure_rate() > max_failure_rate) {
        throw InsufficientSample("nonparametric bootstrap: " + std::to_string(d.failed) + " of " +
                                 std::to_string(d.attempted) + " replicates failed");
    }
    return d;
}

BootstrapDraws boot_measures(const Dataset& data, std::span<const std::size_t> x_cols,
                             std::span<const ResolvedEvent> events, std::span<const MeasureSpec> specs,
                             const BootstrapConfig& config) {
    if (specs.size() != 1 && specs.size() != events.size()) {
        throw InvalidSpec("need one measure per event or a single shared measure");
    }
    auto spec_of = [&](std::size_t j) -> const MeasureSpec& { return specs.size() == 1 ? specs[0] : specs[j]; };
    if (config.method == BootMethod::Exchangeable) {
        std::vector<InfluenceVector> iv;
        for (std::size_t j = 0; j < events.size(); ++j) {
            const auto cop = CondEmpCopula::fit(data, x_cols, events[j]);
            auto f = linearize_measure(cop, spec_of(j), config.quadrature);
            for (double& c : f.coefs) c *= spec_of(j).scale;
            iv.push_back(influence_vector(cop, f));
        }
        auto d = draw_linear(iv, config.scheme, config.M);
        d.statistic_id = "measure:" + spec_of(0).label;
        return d;
    }
    auto statistic = [&](const Dataset& sample) {
        std::vector<double> v;
        for (std::size_t j = 0; j < events.size(); ++j) {
            const auto ev = apply_box(events[j].name, events[j].box, sample);
            const auto cop = CondEmpCopula::fit(sample, x_cols, ev);
            v.push_back(estimate_rho(cop, spec_of(j), config.quadrature).estimate);
        }
        return v;
    };
    auto d = boot_resample(data, statistic, config.M, config.scheme.seed, config.max_failure_rate);
    d.statistic_id = "measure:" + spec_of(0).label;
    return d;
}

std::pair<double, double> percentile_ci(double estimate, std::span<const double> centred, std::size_t n,
                                        double level) {
    if (!(level > 0.0 && level < 1.0)) throw InvalidSpec("confidence level must lie in (0,1)");
    const double sn = std::sqrt(static_cast<double>(n));
    std::vector<double> star(centred.begin(), centred.end());
    for (double& v : star) v = estimate + v / sn;
    const double a = 0.5 * (1.0 - level);
    return {quantile_linear(star, a), quantile_linear(star, 1.0 - a)};
}

}  // namespace condcop
