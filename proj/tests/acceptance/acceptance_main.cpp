// Acceptance checks. Prints one PASS/FAIL line per criterion and exits non-zero on any failure
// not listed with --known-red.
// Usage: acceptance --cli PATH [--known-red ID ...] [criterion ...]

#include "condcop/bootstrap.hpp"
#include "condcop/cli.hpp"
#include "condcop/covariance.hpp"
#include "condcop/empirical.hpp"
#include "condcop/errors.hpp"
#include "condcop/events.hpp"
#include "condcop/mcsim.hpp"
#include "condcop/measures.hpp"
#include "condcop/rng.hpp"

#include "oracles.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace condcop;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(double v, int digits = 4) {
    std::ostringstream s;
    s.precision(digits);
    s << v;
    return s.str();
}

// Random box on the last column between two quantile levels at least `width` apart.
BoxSpec random_box(Rng& rng, std::size_t col, double width, double max_width = 1.0) {
    std::uniform_real_distribution<double> U;
    const double w = width + (max_width - width) * U(rng);
    const double lo = (1.0 - w) * U(rng);
    return quantile_box(ColumnRef::by_index(col), lo, std::min(1.0, lo + w), "random");
}

std::vector<std::size_t> first_columns(std::size_t p) {
    std::vector<std::size_t> x(p);
    std::iota(x.begin(), x.end(), 0);
    return x;
}

// 1: |C_hat - C_bar| <= p / (n_A p_hat) on a 50-per-dimension mesh.
Outcome exact_bound() {
    Rng rng(stream_seed(101, 0));
    std::uniform_int_distribution<std::size_t> N(20, 500);
    std::size_t violations = 0;
    double worst_ratio = 0;
    for (std::size_t d = 0; d < 100; ++d) {
        const std::size_t p = 1 + d % 3, n = N(rng);
        auto data = oracle::random_dataset(rng, n, p + 1);
        auto ev = resolve_event(random_box(rng, p, 0.1), data);
        auto cop = CondEmpCopula::fit(data, first_columns(p), ev);
        const std::vector<std::vector<double>> knots(p, GridEval::uniform_knots(50));
        const auto hat = cop.eval_hat_grid(knots), bar = cop.eval_bar_grid(knots);
        double sup = 0;
        for (std::size_t i = 0; i < hat.values.size(); ++i) sup = std::max(sup, std::abs(hat.values[i] - bar.values[i]));
        const double bound = static_cast<double>(p) / (static_cast<double>(cop.n_A()) * cop.p_hat());
        if (sup > bound) ++violations;
        worst_ratio = std::max(worst_ratio, sup / bound);
    }
    return {violations == 0,
            std::to_string(violations) + " violations in 100 datasets, largest sup/bound " + fmt(worst_ratio)};
}

// 2: |d_k D_hat| <= 5 at 10^4 random (u, dataset) pairs.
Outcome derivative_bound() {
    Rng rng(stream_seed(102, 0));
    std::uniform_int_distribution<std::size_t> N(50, 500);
    std::uniform_real_distribution<double> U;
    std::size_t violations = 0;
    double worst = 0;
    for (std::size_t d = 0; d < 100; ++d) {
        const std::size_t p = 1 + d % 3, n = N(rng);
        auto data = oracle::random_dataset(rng, n, p + 1);
        auto ev = resolve_event(random_box(rng, p, 0.1), data);
        auto cop = CondEmpCopula::fit(data, first_columns(p), ev);
        for (std::size_t r = 0; r < 100; ++r) {
            std::vector<double> u(p);
            for (auto& v : u) v = U(rng);
            bool bad = false;
            for (std::size_t k = 0; k < p; ++k) {
                const double g = std::abs(cop.partial_derivative_hat(u, k));
                worst = std::max(worst, g);
                bad = bad || g > 5.0;
            }
            violations += bad;
        }
    }
    return {violations == 0, std::to_string(violations) + " violations in 10^4 pairs, largest |dD| " + fmt(worst)};
}

// 3: closed forms against brute-force enumeration.
Outcome oracle_equivalence() {
    Rng rng(stream_seed(103, 0));
    std::uniform_int_distribution<std::size_t> N(30, 400);
    double worst = 0;
    std::size_t max_nA = 0;
    for (std::size_t d = 0; d < 50; ++d) {
        const std::size_t p = 2 + d % 2, n = N(rng);
        auto data = oracle::random_dataset(rng, n, p + 1);
        auto ev = resolve_event(random_box(rng, p, 0.1, 0.5), data);
        const auto x = first_columns(p);
        auto cop = CondEmpCopula::fit(data, x, ev);
        max_nA = std::max(max_nA, cop.n_A());
        const auto sub = oracle::subsample(data, x, ev.member_mask);
        const auto U = oracle::cond_ranks(sub);
        const double kend = estimate_rho(cop, MeasureSpec::kendall(p)).raw;
        const double spear = estimate_rho(cop, MeasureSpec::spearman(p)).raw;
        const double blom = estimate_rho(cop, MeasureSpec::blomqvist(p)).raw;
        const double pair = kendall_tau_cond(cop, 0, 1);
        worst = std::max(worst, std::abs(kend - oracle::brute_pairs(U, x)));
        worst = std::max(worst, std::abs(spear - oracle::brute_spearman(U)));
        worst = std::max(worst, std::abs(blom - oracle::hat(sub, std::vector<double>(p, 0.5))));
        worst = std::max(worst, std::abs(pair - (4 * oracle::brute_pairs(U, {0, 1}) - 1)));
    }
    return {worst <= 1e-12 && max_nA <= 200,
            "largest deviation " + fmt(worst) + " over 50 datasets, n_A <= " + std::to_string(max_nA)};
}

// Classical empirical copula on ranks obtained by sorting.
struct ClassicalCopula {
    std::vector<std::vector<double>> U;  // n x p, R / n
    explicit ClassicalCopula(const Dataset& d, std::size_t p) : U(d.rows(), std::vector<double>(p)) {
        const std::size_t n = d.rows();
        for (std::size_t k = 0; k < p; ++k) {
            std::vector<std::size_t> order(n);
            std::iota(order.begin(), order.end(), 0);
            const auto col = d.column(k);
            std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return col[a] < col[b]; });
            for (std::size_t r = 0; r < n; ++r) U[order[r]][k] = static_cast<double>(r + 1) / static_cast<double>(n);
        }
    }
    double operator()(const std::vector<double>& u) const {
        std::size_t c = 0;
        for (const auto& row : U) {
            bool in = true;
            for (std::size_t k = 0; k < u.size(); ++k) in = in && row[k] <= u[k];
            c += in;
        }
        return static_cast<double>(c) / static_cast<double>(U.size());
    }
};

double independence_covariance(const std::vector<double>& u, const std::vector<double>& v) {
    const std::size_t p = u.size();
    auto prod = [](const std::vector<double>& w) { return std::accumulate(w.begin(), w.end(), 1.0, std::multiplies<>()); };
    auto gamma = [&](const std::vector<double>& a, const std::vector<double>& b) {
        std::vector<double> m(p);
        for (std::size_t k = 0; k < p; ++k) m[k] = std::min(a[k], b[k]);
        return prod(m) - prod(a) * prod(b);
    };
    auto partial = [&](const std::vector<double>& w, std::size_t k) {
        double s = 1;
        for (std::size_t j = 0; j < p; ++j)
            if (j != k) s *= w[j];
        return s;
    };
    auto margin = [&](const std::vector<double>& w, std::size_t k) {
        std::vector<double> m(p, 1.0);
        m[k] = w[k];
        return m;
    };
    double g = gamma(u, v);
    for (std::size_t k = 0; k < p; ++k) {
        g -= partial(v, k) * gamma(u, margin(v, k));
        g -= partial(u, k) * gamma(margin(u, k), v);
        for (std::size_t l = 0; l < p; ++l) g += partial(u, k) * partial(v, l) * gamma(margin(u, k), margin(v, l));
    }
    return g;
}

// 4: whole-space event against classical estimators.
Outcome unconditional_reduction() {
    Rng rng(stream_seed(104, 0));
    std::uniform_int_distribution<std::size_t> N(50, 500);
    std::uniform_real_distribution<double> U;
    double worst_est = 0;
    for (std::size_t d = 0; d < 20; ++d) {
        const std::size_t p = 2 + d % 2, n = N(rng);
        auto data = oracle::random_dataset(rng, n, p + 1);
        auto ev = resolve_event(BoxSpec{"all", {}}, data);
        auto cop = CondEmpCopula::fit(data, first_columns(p), ev);
        const ClassicalCopula cc(data, p);
        for (std::size_t r = 0; r < 200; ++r) {
            std::vector<double> u(p);
            for (auto& v : u) v = U(rng);
            worst_est = std::max(worst_est, std::abs(cop.eval_hat(u) - cc(u)));
        }
        double sum_c = 0, sum_s = 0;
        for (const auto& row : cc.U) {
            sum_c += cc(row);
            double s = 1;
            for (double v : row) s *= 1 - v;
            sum_s += s;
        }
        const double two_p = std::ldexp(1.0, static_cast<int>(p));
        const double tau = (two_p * sum_c / static_cast<double>(n) - 1) / (two_p / 2 - 1);
        const double h = static_cast<double>(p + 1) / (two_p - static_cast<double>(p + 1));
        const double rho_s = h * (two_p * sum_s / static_cast<double>(n) - 1);
        worst_est = std::max(worst_est, std::abs(estimate_rho(cop, MeasureSpec::kendall(p)).estimate - tau));
        worst_est = std::max(worst_est, std::abs(estimate_rho(cop, MeasureSpec::spearman(p)).estimate - rho_s));
        if (p == 2) {
            const double beta = 4 * cc({0.5, 0.5}) - 1;
            worst_est = std::max(worst_est, std::abs(estimate_rho(cop, MeasureSpec::blomqvist(2)).estimate - beta));
        }
    }

    const auto sample = simulate(DGPSpec::independence(2, 1, 2000, stream_seed(104, 1)));
    auto cop = CondEmpCopula::fit(sample, first_columns(2), resolve_event(BoxSpec{"all", {}}, sample));
    CovPlugin plug(cop);
    double worst_cov = 0;
    for (double u1 : {0.2, 0.4, 0.6, 0.8})
        for (double u2 : {0.2, 0.5, 0.8})
            for (double v1 : {0.3, 0.5, 0.7})
                for (double v2 : {0.1, 0.5, 0.9}) {
                    std::vector<double> u{u1, u2}, v{v1, v2};
                    worst_cov = std::max(worst_cov, std::abs(plug.cov(u, v) - independence_covariance(u, v)));
                }
    return {worst_est <= 1e-12 && worst_cov <= 0.05,
            "estimators within " + fmt(worst_est) + ", covariance within " + fmt(worst_cov) + " (n=2000)"};
}

std::string joined(const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " > " : "") + fmt(v[i]);
    return s;
}

// 5: median sup|Dbar_n - Dtilde_n| decreases with n.
Outcome weak_convergence() {
    const std::size_t ns[] = {250, 1000, 4000};
    auto g = DGPSpec::gaussian(0.5, ZLink::ZCorrelated, 0.5, 1000, stream_seed(105, 0));
    auto gr = convergence_study(g, population_quantile_box(g, 0.7, 1.0), ns, 100, 20);
    auto ind = DGPSpec::independence(2, 1, 1000, stream_seed(105, 1));
    auto ir = convergence_study(ind, population_quantile_box(ind, 0.0, 0.5), ns, 100, 20);
    return {gr.distance_strictly_decreasing && ir.distance_strictly_decreasing,
            "Gaussian " + joined(gr.median_distance) + "; independence " + joined(ir.median_distance)};
}

DGPSpec conditional_gaussian(std::size_t n, std::uint64_t seed) {
    return DGPSpec::gaussian(0.5, ZLink::ZCorrelated, 0.5, n, seed);
}

// 6: Kolmogorov distance between bootstrap and Monte Carlo laws.
Outcome bootstrap_validity() {
    const auto dgp = conditional_gaussian(1000, stream_seed(106, 0));
    const auto box = population_quantile_box(dgp, 0.7, 1.0);
    BootstrapConfig mult;
    mult.scheme = WeightScheme::multiplier(stream_seed(106, 1));
    mult.M = 2000;
    BootstrapConfig np = mult;
    np.method = BootMethod::Nonparametric;
    np.scheme = WeightScheme::multinomial(stream_seed(106, 2));
    const auto a = bootstrap_validity_study(dgp, box, MeasureSpec::kendall(2), mult, 500);
    const auto b = bootstrap_validity_study(dgp, box, MeasureSpec::kendall(2), np, 500);
    return {a.kolmogorov_distance <= 0.12 && b.kolmogorov_distance <= 0.12,
            "multiplier " + fmt(a.kolmogorov_distance) + ", nonparametric " + fmt(b.kolmogorov_distance) +
                "; sd boot " + fmt(a.boot_sd) + "/" + fmt(b.boot_sd) + " vs MC " + fmt(a.mc_sd) +
                "; means boot " + fmt(a.boot_mean, 2) + "/" + fmt(b.boot_mean, 2) + " vs MC " + fmt(a.mc_mean, 2) +
                "; centred multiplier distance " + fmt(a.centred_distance)};
}

// 7: percentile interval coverage.
Outcome ci_coverage() {
    BootstrapConfig cfg;
    cfg.scheme = WeightScheme::multiplier(stream_seed(107, 1));
    cfg.M = 500;
    auto whole = DGPSpec::gaussian(0.5, ZLink::Independent, 0.0, 500, stream_seed(107, 0));
    const auto a = coverage_study(whole, BoxSpec{"all", {}}, MeasureSpec::kendall(2), cfg, 0.95, 200);
    const auto dgp = conditional_gaussian(500, stream_seed(107, 2));
    const auto b = coverage_study(dgp, population_quantile_box(dgp, 0.7, 1.0), MeasureSpec::kendall(2), cfg, 0.95, 200);
    auto in = [](double c) { return c >= 0.90 && c <= 0.98; };
    return {in(a.coverage) && in(b.coverage),
            "whole space " + fmt(a.coverage) + " (se " + fmt(a.std_error, 2) + "), p_A=0.3 box " + fmt(b.coverage) +
                " (se " + fmt(b.std_error, 2) + ")"};
}

// 8: plug-in covariance against the bootstrap covariance of the copula process. The whole-space
// event gates the check; the p_A = 0.3 box is reported alongside.
Outcome analytic_covariance() {
    const auto dgp = conditional_gaussian(2000, stream_seed(108, 0));
    std::vector<double> points;
    for (int i = 1; i <= 5; ++i)
        for (int j = 1; j <= 5; ++j) {
            points.push_back(i / 6.0);
            points.push_back(j / 6.0);
        }
    BootstrapConfig cfg;
    cfg.scheme = WeightScheme::multiplier(stream_seed(108, 1));
    cfg.M = 2000;
    const auto r = covariance_study(dgp, BoxSpec{"all", {}}, points, cfg, 0.01, 0.2);
    const auto b = covariance_study(dgp, population_quantile_box(dgp, 0.7, 1.0), points, cfg, 0.01, 0.2);
    auto summary = [](const CovarianceReport& c) {
        return std::to_string(c.within_tolerance) + "/" + std::to_string(c.compared) + " within 20%, largest " +
               fmt(c.max_relative_error) + ", median " + fmt(c.median_relative_error);
    };
    return {r.compared > 0 && r.within_tolerance == r.compared,
            "whole space " + summary(r) + "; p_A=0.3 box (not gating) " + summary(b)};
}

// 9: level under the null and power under a regime switch.
Outcome test_level_power() {
    BootstrapConfig cfg;
    cfg.scheme = WeightScheme::multiplier(stream_seed(109, 1));
    cfg.M = 500;
    auto null = DGPSpec::gaussian(0.5, ZLink::Independent, 0.0, 1000, stream_seed(109, 0));
    const auto terciles = quantile_partition(ColumnRef::by_index(null.z_col()), std::size_t{3});
    const auto h0 = rejection_study(null, terciles, MeasureSpec::kendall(2), cfg, 0.05, 200);
    auto alt = DGPSpec::clayton(2.0, 0.0, 2.0 / 3.0, 1.0, 1000, stream_seed(109, 2));
    const auto h1 = rejection_study(alt, terciles, MeasureSpec::kendall(2), cfg, 0.05, 200);
    bool ok = true;
    std::string detail = "level";
    for (std::size_t k = 0; k < h0.kinds.size(); ++k) {
        ok = ok && h0.rejection_rate[k] >= 0.02 && h0.rejection_rate[k] <= 0.10;
        detail += " " + to_string(h0.kinds[k]) + "=" + fmt(h0.rejection_rate[k], 3);
    }
    detail += "; power";
    for (std::size_t k = 0; k < h1.kinds.size(); ++k) {
        ok = ok && h1.rejection_rate[k] >= 0.80;
        detail += " " + to_string(h1.kinds[k]) + "=" + fmt(h1.rejection_rate[k], 3);
    }
    return {ok, detail};
}

std::vector<cli::Json> read_jsonl(const fs::path& p) {
    std::vector<cli::Json> out;
    std::ifstream f(p);
    std::string line;
    while (std::getline(f, line))
        if (!line.empty()) out.push_back(cli::Json::parse(line));
    return out;
}

// 10: the nine-box pipeline through the command-line tool.
Outcome pipeline(const std::string& cli_path) {
    if (cli_path.empty()) return {false, "no --cli path given"};
    const fs::path dir = fs::temp_directory_path() / "condcop_acceptance_pipeline";
    fs::remove_all(dir);
    fs::create_directories(dir);

    // Nine innovation series with a common factor and two blocks.
    const std::vector<std::string> names{"CAC40", "DAX", "AEX", "DowJones", "Nasdaq", "Nikkei", "Brent", "WTI", "Treasury5Y"};
    const std::vector<int> block{0, 0, 0, 1, 1, 2, 3, 3, 4};
    std::vector<double> R(81);
    for (std::size_t i = 0; i < 9; ++i)
        for (std::size_t j = 0; j < 9; ++j) R[i * 9 + j] = i == j ? 1.0 : block[i] == block[j] ? 0.7 : 0.2;
    const auto sample = simulate(DGPSpec::gaussian(R, 9, ZLink::Independent, 0.0, 3000, stream_seed(110, 0)));
    const fs::path csv = dir / "innovations.csv";
    {
        std::ofstream f(csv);
        f << "Date";
        for (const auto& n : names) f << "," << n;
        f << "\n";
        for (std::size_t i = 0; i < sample.rows(); ++i) {
            f << "day" << i;
            for (std::size_t k = 0; k < 9; ++k) f << "," << cli::format_double(sample.at(i, k));
            f << "\n";
        }
    }

    const auto t0 = std::chrono::steady_clock::now();
    const std::string est_cmd = "\"" + cli_path + "\" estimate --data \"" + csv.string() +
                                "\" --pipeline-boxes all --pairs --measure kendall --boot-reps 500 --seed 7 --out \"" +
                                (dir / "estimate").string() + "\"";
    const int est_code = std::system(est_cmd.c_str());
    const double est_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const std::string tb_cmd = "\"" + cli_path + "\" tau-baseline --data \"" + csv.string() +
                               "\" --pipeline-boxes all --out \"" + (dir / "baseline").string() + "\"";
    const int tb_code = std::system(tb_cmd.c_str());
    if (est_code != 0 || tb_code != 0) {
        return {false, "tool exit codes " + std::to_string(est_code) + ", " + std::to_string(tb_code)};
    }

    // One record per (pair, conditioning column, box).
    const auto recs = read_jsonl(dir / "estimate" / "estimate.jsonl");
    std::set<std::string> keys;
    std::map<std::string, std::size_t> n_A;
    bool fields_ok = true;
    for (const auto& r : recs) {
        const std::string cond = r.at("conditioning")[0].get<std::string>();
        const std::string key = r.at("x")[0].get<std::string>() + "|" + r.at("x")[1].get<std::string>() + "|" + cond +
                                "|" + r.at("label").get<std::string>();
        keys.insert(key);
        n_A[cond + "|" + r.at("label").get<std::string>()] = r.at("n_A").get<std::size_t>();
        fields_ok = fields_ok && r.at("estimate").is_number() && r.at("ci_lower").is_number() &&
                    r.at("ci_upper").is_number();
    }
    const std::size_t expected = 9 * 28 * 9;
    const bool records_ok = recs.size() == expected && keys.size() == expected && fields_ok;

    // Baseline: every triplet carries the unconditional value, identical across conditioning columns.
    const auto base = read_jsonl(dir / "baseline" / "tau_baseline.jsonl");
    std::map<std::string, double> uncond;
    bool baseline_ok = base.size() == 9 * 28;
    std::size_t outside = 0;
    for (const auto& r : base) {
        const std::string pair = r.at("x")[0].get<std::string>() + "|" + r.at("x")[1].get<std::string>();
        const double t = r.at("unconditional_tau").get<double>();
        auto [it, fresh] = uncond.emplace(pair, t);
        baseline_ok = baseline_ok && (fresh || it->second == t) && r.contains("decomposition") &&
                      std::abs(r.at("decomposition").at("reconstructed").get<double>() - t) < 1e-12;
        outside += r.value("outside_hull", false);
    }
    baseline_ok = baseline_ok && uncond.size() == 36;

    // Nesting: A2 = A1 + A4 as disjoint masks, and A3, A5, A6 partition the sample.
    const auto data = cli::read_csv(csv.string());
    bool nesting_ok = true;
    for (const auto& name : names) {
        const auto g = cli::pipeline_group(ColumnRef::by_name(name));
        const auto ev = resolve_family(g.boxes, data);
        for (std::size_t i = 0; i < data.rows(); ++i) {
            nesting_ok = nesting_ok && ev[1].contains(i) == (ev[0].contains(i) || ev[3].contains(i));
            nesting_ok = nesting_ok && !(ev[0].contains(i) && ev[3].contains(i));
        }
        const std::vector<ResolvedEvent> part{ev[2], ev[4], ev[5]};
        nesting_ok = nesting_ok && cli::is_partition(part);
        nesting_ok = nesting_ok && n_A[name + "|A2"] == n_A[name + "|A1"] + n_A[name + "|A4"];
    }

    const bool ok = records_ok && baseline_ok && nesting_ok && est_seconds < 120.0;
    return {ok, std::to_string(recs.size()) + " records in " + fmt(est_seconds, 3) + " s, baseline " +
                    std::to_string(base.size()) + " triplets (" + std::to_string(outside) +
                    " outside the conditional hull), nesting " + (nesting_ok ? "holds" : "broken")};
}

}  // namespace

int main(int argc, char** argv) {
    std::string cli_path;
    std::set<int> only, known_red;
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        if (a == "--cli" && i + 1 < argc) {
            cli_path = argv[++i];
        } else if (a == "--known-red" && i + 1 < argc) {
            known_red.insert(std::atoi(argv[++i]));
        } else {
            only.insert(std::atoi(a.c_str()));
        }
    }
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"exact finite-sample bound", exact_bound},
        {"derivative bound", derivative_bound},
        {"oracle equivalence", oracle_equivalence},
        {"unconditional reduction", unconditional_reduction},
        {"weak-convergence proxy", weak_convergence},
        {"bootstrap validity", bootstrap_validity},
        {"confidence interval coverage", ci_coverage},
        {"analytic covariance", analytic_covariance},
        {"test level and power", test_level_power},
        {"pipeline structure", [&] { return pipeline(cli_path); }},
    };
    int failures = 0, run = 0, passed = 0;
    for (std::size_t c = 0; c < criteria.size(); ++c) {
        const int id = static_cast<int>(c) + 1;
        if (!only.empty() && !only.count(id)) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[c].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("ACCEPTANCE %2d %s  %s: %s [%.1f s]\n", id, o.pass ? "PASS" : "FAIL", criteria[c].first.c_str(),
                    o.detail.c_str(), s);
        std::fflush(stdout);
        ++run;
        passed += o.pass;
        failures += !o.pass && !known_red.count(id);
    }
    std::printf("ACCEPTANCE SUMMARY %d/%d pass, %d unexpected failures\n", passed, run, failures);
    return failures == 0 ? 0 : 1;
}
