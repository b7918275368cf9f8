#include "condcop/cli.hpp"
#include "condcop/errors.hpp"
#include "condcop/rng.hpp"

#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

using namespace condcop;
using namespace condcop::cli;
namespace fs = std::filesystem;

namespace {

int run_args(std::vector<std::string> args, std::string* out_text = nullptr, std::string* err_text = nullptr) {
    args.insert(args.begin(), "condcop");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = run(static_cast<int>(argv.size()), argv.data(), out, err);
    if (out_text) *out_text = out.str();
    if (err_text) *err_text = err.str();
    return code;
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("condcop_cli_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

// Three columns driven by a common factor, with a date column.
fs::path factor_csv(const fs::path& dir, std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::normal_distribution<double> g;
    const fs::path p = dir / "data.csv";
    std::ofstream f(p);
    f << "Date,A,B,Z\n";
    for (std::size_t i = 0; i < n; ++i) {
        const double c = g(rng);
        f << "2020-01-" << i << "," << format_double(0.8 * c + 0.6 * g(rng)) << ","
          << format_double(0.8 * c + 0.6 * g(rng)) << "," << format_double(0.8 * c + 0.6 * g(rng)) << "\n";
    }
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::stringstream s;
    s << f.rdbuf();
    return s.str();
}

}  // namespace

TEST_CASE("CSV ingestion") {
    std::istringstream a("Date,x,y\n2020-01-01,1.5,2\n2020-01-02,-3e-2,+4\n\n");
    auto d = parse_csv(a);
    CHECK(d.cols() == 2);
    CHECK(d.rows() == 2);
    CHECK(d.name(0) == "x");
    CHECK(d.at(1, 0) == -0.03);
    CHECK(d.at(1, 1) == 4.0);

    std::istringstream b("x,y\n1,2\r\n3,4\r\n");
    auto e = parse_csv(b);
    CHECK(e.cols() == 2);
    CHECK(e.at(1, 1) == 4.0);

    std::istringstream c("\"when\",x\n\"Jan 1, 2020\",1\n");
    CHECK(parse_csv(c).cols() == 1);

    std::istringstream numeric_first("t,x\n1,2\n2,3\n");
    CHECK(parse_csv(numeric_first, DateColumn::Yes).cols() == 1);
    std::istringstream keep("a,x\n1,2\n");
    CHECK(parse_csv(keep, DateColumn::No).cols() == 2);

    auto message = [](const std::string& text) {
        std::istringstream s(text);
        try {
            parse_csv(s, DateColumn::Auto, "f.csv");
        } catch (const DataError& e) {
            return std::string(e.what());
        }
        return std::string("no error");
    };
    CHECK(message("Date,x,y\nd,1,2\nd,1,oops\n") == "f.csv: line 3, column 3 ('y'): non-numeric value 'oops'");
    CHECK(message("Date,x,y\nd,1,\n") == "f.csv: line 2, column 3 ('y'): non-numeric value ''");
    CHECK(message("Date,x\nd,nan\n") == "f.csv: line 2, column 2 ('x'): non-numeric value 'nan'");
    CHECK(message("Date,x\nd,inf\n").find("non-numeric") != std::string::npos);
    CHECK(message("Date,x,y\nd,1\n").find("2 fields, header has 3") != std::string::npos);
    CHECK(message("x,x\n1,2\n").find("duplicate") != std::string::npos);
    CHECK(message("x,y\n").find("no data rows") != std::string::npos);
}

TEST_CASE("event families from JSON") {
    auto groups = parse_events(Json::parse(R"({"bounds":[{"col":"DAX","lower":{"quantile":0.0},"upper":{"quantile":0.05}}]})"));
    REQUIRE(groups.size() == 1);
    REQUIRE(groups[0].boxes.size() == 1);
    const auto& b = groups[0].boxes[0].bounds[0];
    CHECK(b.col.name == "DAX");
    CHECK(b.lower.kind == BoundKind::Quantile);
    CHECK(b.upper.value == 0.05);
    CHECK(groups[0].conditioning == std::vector<std::string>{"DAX"});

    auto many = parse_events(Json::parse(R"([
        {"name":"lo","bounds":[{"col":2,"upper":{"value":0.5,"inclusive":false}}]},
        {"name":"hi","bounds":[{"col":2,"lower":{"value":0.5},"lower_inclusive":true}]},
        {"pipeline":"Z"},
        {"partition":{"col":"Z","parts":3}}])"));
    REQUIRE(many.size() == 3);
    CHECK(many[0].boxes.size() == 2);
    CHECK(*many[0].boxes[0].bounds[0].col.index == 1);
    CHECK(many[0].boxes[0].bounds[0].lower.kind == BoundKind::Unbounded);
    CHECK(*many[0].boxes[0].bounds[0].upper.inclusive == false);
    CHECK(*many[0].boxes[1].bounds[0].lower.inclusive == true);
    CHECK(many[1].boxes.size() == 9);
    CHECK(many[1].labels[8] == "A9");
    CHECK(many[1].partition == std::vector<std::size_t>{2, 4, 5});
    CHECK(many[2].boxes.size() == 3);

    CHECK_THROWS_AS(parse_events(Json::parse(R"({"bounds":[{"col":0}]})")), InvalidSpec);
    CHECK_THROWS_AS(parse_events(Json::parse(R"({"bounds":[{"col":"Z","upper":{"quantile":1.5}}]})")), InvalidSpec);
    CHECK_THROWS_AS(parse_events(Json::parse(R"({"bounds":[{"col":"Z","upper":{"level":0.5}}]})")), InvalidSpec);
}

TEST_CASE("measure specs from JSON") {
    auto k = parse_measure(Json("kendall"), 2);
    CHECK(k.label == MeasureSpec::kendall(2).label);
    auto c = parse_measure(Json::parse(R"({"psi":"constant","K":[1,2],"Kprime":[]})"), 2);
    CHECK(c.K == std::vector<std::size_t>{0, 1});
    CHECK(c.K_prime.empty());
    CHECK(c.scale == 1.0);
    auto t = parse_measure(Json::parse(R"({"psi":"tail","u0":[0.1,0.1],"v0":[0.9,0.9],"Kprime":[1,2]})"), 2);
    CHECK(t.psi.kind() == PsiKind::Tail);
    auto r = parse_measure(Json::parse(R"({"psi":"reflection","weights":[{"eps":[1,1],"w":1}],"K":[1,2]})"), 2);
    CHECK(r.psi.kind() == PsiKind::Reflection);
    auto pre = parse_measure(Json::parse(R"({"preset":"spearman","label":"rho_s"})"), 3);
    CHECK(pre.label == "rho_s");
    CHECK_THROWS_AS(parse_measure(Json("pearson"), 2), InvalidSpec);
    CHECK_THROWS_AS(parse_measure(Json::parse(R"({"psi":"constant","K":[3]})"), 2), InvalidSpec);
    CHECK_THROWS_AS(parse_measure(Json::parse(R"({"psi":"constant","K":[0]})"), 2), InvalidSpec);
    CHECK_THROWS_AS(parse_measure(Json("gini"), 3), InvalidSpec);
    CHECK_THROWS_AS(boot_config("jackknife", 10, 1), InvalidSpec);
    CHECK(boot_config("nonparametric", 10, 1).method == BootMethod::Nonparametric);
}

TEST_CASE("V-statistic Kendall's tau") {
    // Comonotone, n = 5: 20 concordant ordered pairs out of 25.
    std::vector<double> x{1, 2, 3, 4, 5}, y{10, 20, 30, 40, 50};
    CHECK(kendall_v(x, y) == doctest::Approx(0.8).epsilon(1e-15));
    std::vector<double> rev{5, 4, 3, 2, 1};
    CHECK(kendall_v(x, rev) == doctest::Approx(-0.8).epsilon(1e-15));
    // Enumeration with a tie: pairs (1,2) and (3,4) of x tie.
    std::vector<double> xt{1, 1, 2, 2}, yt{1, 2, 3, 0};
    // Ordered-pair signs: (1,3)+ (1,4)- (2,3)+ (2,4)- -> sum 0 over unordered pairs.
    CHECK(kendall_v(xt, yt) == doctest::Approx(0.0).scale(1.0));

    Rng rng(3);
    std::uniform_real_distribution<double> u;
    std::vector<double> a(10000), b(10000);
    for (std::size_t i = 0; i < a.size(); ++i) {
        a[i] = u(rng);
        b[i] = u(rng);
    }
    CHECK(std::abs(kendall_v(a, b)) < 0.03);
}

TEST_CASE("tau decomposition over a partition") {
    Rng rng(5);
    std::normal_distribution<double> g;
    const std::size_t n = 600;
    std::vector<std::vector<double>> cols(3, std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i) {
        const double c = g(rng);
        for (auto& col : cols) col[i] = 0.8 * c + 0.6 * g(rng);
    }
    Dataset d({"A", "B", "Z"}, cols);
    const auto boxes = quantile_partition(ColumnRef::by_name("Z"), std::size_t{3});
    const auto events = resolve_family(boxes, d);
    CHECK(is_partition(events));
    const auto dec = decompose_tau(d.column(0), d.column(1), events);
    CHECK(dec.tau == doctest::Approx(kendall_v(d.column(0), d.column(1))).epsilon(1e-14));
    CHECK(dec.reconstructed == doctest::Approx(dec.tau).epsilon(1e-12));
    double wsum = 0;
    for (double w : dec.weights) wsum += w;
    CHECK(wsum == doctest::Approx(1.0));
    for (std::size_t k = 0; k < 3; ++k) {
        const auto sub = d.select_rows(events[k].members);
        CHECK(dec.co_tau[k * 3 + k] == doctest::Approx(kendall_v(sub.column(0), sub.column(1))).epsilon(1e-13));
        for (std::size_t l = 0; l < 3; ++l) CHECK(dec.co_tau[k * 3 + l] == dec.co_tau[l * 3 + k]);
    }
    // A common factor shrinks every within-box tau below the unconditional one.
    CHECK(dec.outside_hull);
    std::vector<ResolvedEvent> overlap{events[0], events[0]};
    CHECK_FALSE(is_partition(overlap));
    CHECK_THROWS_AS(decompose_tau(d.column(0), d.column(1), overlap), InvalidSpec);
}

TEST_CASE("estimate command") {
    const auto dir = scratch("estimate");
    const auto csv = factor_csv(dir, 400, 11).string();
    const auto out1 = (dir / "o1").string(), out2 = (dir / "o2").string();
    std::string err;
    REQUIRE(run_args({"estimate", "--data", csv, "--x", "A,B", "--pipeline-boxes", "Z", "--boot-reps", "100", "--seed",
                      "3", "--out", out1, "--dump-replicates", "--threads", "2"},
                     nullptr, &err) == 0);
    REQUIRE(run_args({"estimate", "--data", csv, "--x", "A,B", "--pipeline-boxes", "Z", "--boot-reps", "100", "--seed",
                      "3", "--out", out2, "--dump-replicates", "--threads", "1"}) == 0);
    CHECK(slurp(fs::path(out1) / "estimate.jsonl") == slurp(fs::path(out2) / "estimate.jsonl"));
    CHECK(slurp(fs::path(out1) / "estimate_wide.csv") == slurp(fs::path(out2) / "estimate_wide.csv"));

    std::ifstream f(fs::path(out1) / "estimate.jsonl");
    std::string line;
    std::size_t count = 0;
    while (std::getline(f, line)) {
        const auto rec = Json::parse(line);
        CHECK(rec.at("ci_lower").get<double>() <= rec.at("ci_upper").get<double>());
        CHECK(rec.at("x") == Json::array({"A", "B"}));
        CHECK(rec.at("conditioning") == Json::array({"Z"}));
        ++count;
    }
    CHECK(count == 9);
    CHECK(fs::exists(fs::path(out1) / "replicates" / "A-B__Z__kendall.csv"));

    std::string stdout_text;
    REQUIRE(run_args({"estimate", "--data", csv, "--pairs", "--boot-reps", "0", "--measure", "spearman", "--measure",
                      R"({"psi":"blomqvist","Kprime":[1,2],"label":"beta_raw"})"},
                     &stdout_text) == 0);
    std::istringstream lines(stdout_text);
    count = 0;
    while (std::getline(lines, line)) {
        const auto rec = Json::parse(line);
        CHECK(rec.at("ci_lower").is_null());
        ++count;
    }
    CHECK(count == 6);  // three pairs, two measures, whole space

    CHECK(run_args({"estimate", "--data", csv, "--x", "A,Missing"}, nullptr, &err) == 2);
    CHECK(err.find("Missing") != std::string::npos);
    CHECK(run_args({"estimate", "--data", csv, "--events",
                    R"({"name":"nothing","bounds":[{"col":"Z","lower":{"quantile":0},"upper":{"quantile":0}}]})"},
                   nullptr, &err) == 3);
    CHECK(err.find("nothing") != std::string::npos);
    CHECK(run_args({"estimate", "--data", (dir / "absent.csv").string()}) == 2);
    CHECK(run_args({"estimate", "--data", csv, "--measure", "pearson"}) == 2);
    CHECK(run_args({"estimate", "--data", csv, "--boot-scheme", "jackknife"}) == 2);
    CHECK(run_args({"estimate", "--data", csv, "--partition", "Z"}) == 2);
    CHECK(run_args({"frobnicate"}) == 2);
    CHECK(run_args({"estimate", "--help"}) == 0);
}

TEST_CASE("test and tau-baseline commands") {
    const auto dir = scratch("test");
    const auto csv = factor_csv(dir, 600, 13).string();
    std::string text;
    REQUIRE(run_args({"test", "--data", csv, "--x", "A,B", "--partition", "Z:3", "--kind", "both", "--boot-reps",
                      "99", "--seed", "7"},
                     &text) == 0);
    std::istringstream lines(text);
    std::string line;
    std::vector<Json> recs;
    while (std::getline(lines, line)) recs.push_back(Json::parse(line));
    REQUIRE(recs.size() == 2);
    CHECK(recs[0].at("kind") == "cvm");
    CHECK(recs[1].at("kind") == "ks");
    CHECK(recs[0].at("m") == 3);
    CHECK(recs[0].at("p_value").get<double>() > 0.0);
    CHECK(run_args({"test", "--data", csv, "--x", "A,B", "--partition", "Z:1"}) == 2);

    const auto out = (dir / "tb").string();
    REQUIRE(run_args({"tau-baseline", "--data", csv, "--pipeline-boxes", "Z", "--out", out}) == 0);
    std::ifstream f(fs::path(out) / "tau_baseline.jsonl");
    REQUIRE(std::getline(f, line));
    const auto rec = Json::parse(line);
    CHECK(rec.at("x") == Json::array({"A", "B"}));
    CHECK(rec.at("conditional").size() == 9);
    CHECK(rec.at("decomposition").at("events") == Json::array({"A3_Z", "A5_Z", "A6_Z"}));
    CHECK(rec.at("decomposition").at("reconstructed").get<double>() ==
          doctest::Approx(rec.at("unconditional_tau").get<double>()).epsilon(1e-12));
    CHECK(rec.at("outside_hull").get<bool>());
    CHECK(fs::exists(fs::path(out) / "tau_baseline_wide.csv"));
}

TEST_CASE("simulate command") {
    const auto dir = scratch("simulate");
    const auto cfg = dir / "study.json";
    {
        std::ofstream f(cfg);
        f << R"({"dgp":{"kind":"gaussian","rho":0.5,"link":"independent","n":300,"seed":2},"reps":1,"boot":{"reps":50}})";
    }
    std::string text;
    REQUIRE(run_args({"simulate", "--study", "coverage", "--config", cfg.string()}, &text) == 0);
    const auto rep = Json::parse(text);
    CHECK(rep.at("reps") == 1);
    const double cov = rep.at("coverage").get<double>();
    CHECK((cov == 0.0 || cov == 1.0));
    REQUIRE(run_args({"simulate", "--study", "sample", "--config", cfg.string(), "--out", dir.string()}) == 0);
    CHECK(read_csv((dir / "sample.csv").string()).rows() == 300);
    {
        std::ofstream f(cfg);
        f << R"({"dgp":{"kind":"gaussian","R":[1,2,2,1],"n":10}})";
    }
    CHECK(run_args({"simulate", "--study", "coverage", "--config", cfg.string()}) == 2);
    CHECK(run_args({"simulate", "--study", "unknown", "--config", cfg.string()}) == 2);
}
