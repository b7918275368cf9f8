#include "condcop/eqtest.hpp"
#include "condcop/errors.hpp"

#include "doctest.h"
#include "oracles.hpp"

#include <cmath>
#include <numeric>
#include <random>

using namespace condcop;

namespace {

BootstrapConfig small_config(std::size_t M = 200) {
    BootstrapConfig cfg;
    cfg.M = M;
    cfg.scheme = WeightScheme::multiplier(17);
    return cfg;
}

}  // namespace

TEST_CASE("contrast statistics") {
    std::vector<double> x{1.0, 3.0, 0.0};
    CHECK(contrast_statistic(x, StatKind::CvM) == 5.0);
    CHECK(contrast_statistic(x, StatKind::KS) == 2.0);
    CHECK(contrast_statistic(x, StatKind::CvM, true) == 14.0);
    CHECK(contrast_statistic(x, StatKind::KS, true) == 3.0);
    std::vector<double> eq{0.4, 0.4, 0.4};
    CHECK(contrast_statistic(eq, StatKind::CvM) == 0.0);
    CHECK(contrast_statistic(eq, StatKind::KS) == 0.0);
}

TEST_CASE("add-one p-value") {
    std::vector<double> d{0.1, 0.5, 0.9, 1.3};
    CHECK(bootstrap_pvalue(0.0, d) == 1.0);
    CHECK(bootstrap_pvalue(0.6, d) == doctest::Approx(3.0 / 5.0));
    CHECK(bootstrap_pvalue(2.0, d) == doctest::Approx(1.0 / 5.0));
    double last = 1.0;
    for (double t = 0; t < 2; t += 0.05) {
        const double p = bootstrap_pvalue(t, d);
        CHECK(p <= last);
        CHECK(p > 0.0);
        last = p;
    }
}

TEST_CASE("identical events give a zero statistic and p-value one") {
    std::mt19937_64 rng(1);
    auto d = oracle::random_dataset(rng, 300, 3);
    auto ev = resolve_event(quantile_box(ColumnRef::by_index(2), 0.2, 0.9), d);
    std::vector<ResolvedEvent> events{ev, ev};
    std::vector<std::size_t> x{0, 1};
    for (auto kind : {StatKind::CvM, StatKind::KS}) {
        auto r = test_equality(d, x, events, MeasureSpec::kendall(2), kind, small_config());
        CHECK(r.observed == 0.0);
        CHECK(r.p_value == 1.0);
        CHECK(r.m == 2);
        CHECK(r.boot.M == 200);
    }
}

TEST_CASE("fewer than two events is rejected") {
    std::mt19937_64 rng(2);
    auto d = oracle::random_dataset(rng, 50, 3);
    std::vector<ResolvedEvent> events{resolve_event(BoxSpec{"all", {}}, d)};
    std::vector<std::size_t> x{0, 1};
    CHECK_THROWS_AS(test_equality(d, x, events, MeasureSpec::kendall(2), StatKind::CvM, small_config()),
                    InvalidSpec);
    CHECK_THROWS_AS(stat_kind_from_string("ad"), InvalidSpec);
}

TEST_CASE("empty events surface before testing") {
    std::mt19937_64 rng(3);
    auto d = oracle::random_dataset(rng, 50, 3);
    std::vector<BoxSpec> boxes{quantile_box(ColumnRef::by_index(2), 0.0, 0.5),
                               quantile_box(ColumnRef::by_index(2), 0.0, 0.0)};
    CHECK_THROWS_AS(resolve_family(boxes, d), EmptyEvent);
}

TEST_CASE("scale consistency for two events and row-permutation invariance") {
    std::mt19937_64 rng(4);
    auto d = oracle::random_dataset(rng, 400, 3);
    std::vector<BoxSpec> boxes{quantile_box(ColumnRef::by_index(2), 0.0, 0.5),
                               quantile_box(ColumnRef::by_index(2), 0.5, 1.0)};
    auto events = resolve_family(boxes, d);
    std::vector<std::size_t> x{0, 1};
    auto spec = MeasureSpec::kendall(2);
    auto cvm = test_equality(d, x, events, spec, StatKind::CvM, small_config());
    auto ks = test_equality(d, x, events, spec, StatKind::KS, small_config());
    const double c = cvm.estimates[0] - cvm.estimates[1];
    CHECK(cvm.observed == doctest::Approx(400.0 * c * c).epsilon(1e-12));
    CHECK(ks.observed == doctest::Approx(20.0 * std::abs(c)).epsilon(1e-12));
    CHECK(cvm.p_value >= 0.0);
    CHECK(cvm.p_value <= 1.0);
    for (double t : cvm.boot.replicates) CHECK(t >= 0.0);

    std::vector<std::size_t> perm(400);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    auto dp = d.select_rows(perm);
    auto pe = resolve_family(boxes, dp);
    auto cvm_p = test_equality(dp, x, pe, spec, StatKind::CvM, small_config());
    CHECK(cvm_p.observed == doctest::Approx(cvm.observed).epsilon(1e-12));
}

TEST_CASE("all-pairs variant over a tercile partition") {
    std::mt19937_64 rng(5);
    auto d = oracle::random_dataset(rng, 600, 3);
    auto events = resolve_family(quantile_partition(ColumnRef::by_index(2), std::size_t{3}), d);
    std::vector<std::size_t> x{0, 1};
    auto r = test_equality(d, x, events, MeasureSpec::kendall(2), StatKind::CvM, small_config(), true);
    std::vector<double> sc;
    for (double e : r.estimates) sc.push_back(std::sqrt(600.0) * e);
    CHECK(r.all_pairs);
    CHECK(r.observed == doctest::Approx(contrast_statistic(sc, StatKind::CvM, true)).epsilon(1e-12));
    CHECK(r.m == 3);
}

TEST_CASE("strongly different conditional dependence is rejected") {
    // First half independent, second half strongly dependent.
    std::mt19937_64 rng(6);
    std::normal_distribution<double> nd;
    const std::size_t n = 1000;
    std::vector<double> a(n), b(n), z(n);
    for (std::size_t i = 0; i < n; ++i) {
        z[i] = static_cast<double>(i);
        a[i] = nd(rng);
        b[i] = i < n / 2 ? nd(rng) : 0.9 * a[i] + 0.3 * nd(rng);
    }
    Dataset d({"a", "b", "z"}, {a, b, z});
    auto events = resolve_family(quantile_partition(ColumnRef::by_name("z"), std::size_t{2}), d);
    std::vector<std::size_t> x{0, 1};
    auto r = test_equality(d, x, events, MeasureSpec::kendall(2), StatKind::KS, small_config(500));
    CHECK(r.p_value < 0.01);
}
