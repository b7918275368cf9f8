#include "condcop/eqtest.hpp"

#include "condcop/errors.hpp"

#include <algorithm>
#include <cmath>

namespace condcop {

std::string to_string(StatKind k) { return k == StatKind::CvM ? "cvm" : "ks"; }

StatKind stat_kind_from_string(const std::string& s) {
    if (s == "cvm" || s == "CvM") return StatKind::CvM;
    if (s == "ks" || s == "KS") return StatKind::KS;
    throw InvalidSpec("unknown test statistic '" + s + "' (expected cvm or ks)");
}

double contrast_statistic(std::span<const double> x, StatKind kind, bool all_pairs) {
    double s = 0.0;
    auto add = [&](double d) {
        if (kind == StatKind::CvM)
            s += d * d;
        else
            s = std::max(s, std::abs(d));
    };
    for (std::size_t i = 0; i < x.size(); ++i)
        for (std::size_t j = i + 1; j < x.size(); ++j) {
            if (!all_pairs && i > 0) break;
            add(x[i] - x[j]);
        }
    return s;
}

double bootstrap_pvalue(double observed, std::span<const double> draws) {
    const auto ge = std::count_if(draws.begin(), draws.end(), [&](double t) { return t >= observed; });
    return (1.0 + static_cast<double>(ge)) / (static_cast<double>(draws.size()) + 1.0);
}

std::vector<TestResult> test_equality_kinds(const Dataset& data, std::span<const std::size_t> x_cols,
                                            std::span<const ResolvedEvent> events, const MeasureSpec& spec,
                                            std::span<const StatKind> kinds, const BootstrapConfig& config,
                                            bool all_pairs) {
    const std::size_t m = events.size();
    if (m < 2) throw InvalidSpec("test_equality: at least two events are required");
    const std::vector<MeasureSpec> one{spec};
    const auto res = estimate_rho_family(data, x_cols, one, events, config.quadrature);
    const double rn = std::sqrt(static_cast<double>(data.rows()));
    std::vector<double> estimates(m), scaled(m);
    for (std::size_t j = 0; j < m; ++j) {
        estimates[j] = res[j].estimate;
        scaled[j] = rn * res[j].estimate;
    }
    // Replicates are sqrt(n)(rho*_j - rho_j); their contrasts give T* directly.
    const auto draws = boot_measures(data, x_cols, events, one, config);

    std::vector<TestResult> out;
    std::vector<double> z(m);
    for (auto kind : kinds) {
        TestResult t;
        t.kind = kind;
        t.m = m;
        t.spec = spec;
        t.all_pairs = all_pairs;
        t.estimates = estimates;
        t.observed = contrast_statistic(scaled, kind, all_pairs);
        t.boot.M = draws.M;
        t.boot.dim = 1;
        t.boot.scheme = draws.scheme;
        t.boot.statistic_id = "T_" + to_string(kind);
        t.boot.failed = draws.failed;
        t.boot.attempted = draws.attempted;
        t.boot.replicates.resize(draws.M);
        for (std::size_t r = 0; r < draws.M; ++r) {
            for (std::size_t j = 0; j < m; ++j) z[j] = draws.at(r, j);
            t.boot.replicates[r] = contrast_statistic(z, kind, all_pairs);
        }
        t.p_value = bootstrap_pvalue(t.observed, t.boot.replicates);
        out.push_back(std::move(t));
    }
    return out;
}

TestResult test_equality(const Dataset& data, std::span<const std::size_t> x_cols,
                         std::span<const ResolvedEvent> events, const MeasureSpec& spec, StatKind kind,
                         const BootstrapConfig& config, bool all_pairs) {
    const StatKind k[] = {kind};
    return test_equality_kinds(data, x_cols, events, spec, k, config, all_pairs).front();
}

}  // namespace condcop
