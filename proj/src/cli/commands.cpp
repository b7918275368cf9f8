#include "condcop/cli.hpp"
#include "condcop/eqtest.hpp"
#include "condcop/errors.hpp"
#include "condcop/rng.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <thread>

namespace condcop::cli {

namespace fs = std::filesystem;

namespace {

// -- shared helpers ------------------------------------------------------------------------

template <class F>
void parallel_for(std::size_t count, std::size_t threads, F&& f) {
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = std::min(threads, std::max<std::size_t>(count, 1));
    std::vector<std::exception_ptr> errors(count);
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t i = next++; i < count; i = next++) {
            try {
                f(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(work);
    work();
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

void write_atomic(const fs::path& path, const std::string& content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw InvalidSpec("cannot write '" + tmp.string() + "'");
        f << content;
        if (!f) throw InvalidSpec("failed writing '" + tmp.string() + "'");
    }
    fs::rename(tmp, path);
}

Json read_json_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw InvalidSpec("cannot open '" + path + "'");
    try {
        return Json::parse(f);
    } catch (const Json::parse_error& e) {
        throw InvalidSpec(path + ": " + e.what());
    }
}

// A JSON file, inline JSON or a bare preset name.
Json json_argument(const std::string& arg) {
    if (!arg.empty() && (arg.front() == '{' || arg.front() == '[')) {
        try {
            return Json::parse(arg);
        } catch (const Json::parse_error& e) {
            throw InvalidSpec(std::string("inline JSON: ") + e.what());
        }
    }
    if (fs::is_regular_file(arg)) return read_json_file(arg);
    return Json(arg);
}

std::string join(const std::vector<std::string>& v, const char* sep) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? sep : "") + v[i];
    return s;
}

std::string csv_cell(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
    return q + "\"";
}

std::string safe_name(std::string s) {
    for (char& c : s)
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_' && c != '.') c = '_';
    return s;
}

Json number_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

Json box_json(const ResolvedEvent& ev, const Dataset& data) {
    Json a = Json::array();
    for (const auto& b : ev.box) {
        a.push_back({{"col", data.name(b.col)},
                     {"lower", number_or_null(b.lower)},
                     {"upper", number_or_null(b.upper)},
                     {"lower_inclusive", b.lower_inclusive},
                     {"upper_inclusive", b.upper_inclusive}});
    }
    return a;
}

// Options shared by the data-driven commands.
struct DataOptions {
    std::string data;
    std::string date = "auto";
    std::vector<std::string> x;
    std::string events;
    std::vector<std::string> pipeline;
    std::vector<std::string> partition;
    std::string out;
    std::size_t threads = 0;

    void add(CLI::App* app) {
        app->add_option("--data", data, "input CSV (header row, optional leading date column)")->required();
        app->add_option("--date-column", date, "auto, yes or no")->check(CLI::IsMember({"auto", "yes", "no"}));
        app->add_option("--x", x, "X columns, comma separated (default: all non-conditioning columns)")
            ->delimiter(',');
        app->add_option("--events", events, "JSON file (or inline JSON) of conditioning events");
        app->add_option("--pipeline-boxes", pipeline, "columns receiving the nine quantile boxes, or 'all'")
            ->delimiter(',');
        app->add_option("--partition", partition, "COL:K, K equal-probability quantile boxes on COL");
        app->add_option("--out", out, "output directory");
        app->add_option("--threads", threads, "worker threads (0: all cores)");
    }

    Dataset load() const {
        const DateColumn d = date == "yes" ? DateColumn::Yes : date == "no" ? DateColumn::No : DateColumn::Auto;
        return read_csv(data, d);
    }

    std::vector<EventGroup> groups(const Dataset& dataset) const {
        std::vector<EventGroup> out_groups;
        if (!events.empty()) {
            for (auto& g : parse_events(json_argument(events))) out_groups.push_back(std::move(g));
        }
        for (const auto& c : pipeline) {
            if (c == "all") {
                for (const auto& name : dataset.names()) out_groups.push_back(pipeline_group(ColumnRef::by_name(name)));
            } else {
                out_groups.push_back(pipeline_group(ColumnRef::by_name(c)));
            }
        }
        for (const auto& p : partition) {
            const auto colon = p.rfind(':');
            if (colon == std::string::npos) throw InvalidSpec("--partition expects COL:K, got '" + p + "'");
            std::size_t k = 0;
            try {
                k = std::stoul(p.substr(colon + 1));
            } catch (const std::exception&) {
                throw InvalidSpec("--partition expects COL:K, got '" + p + "'");
            }
            out_groups.push_back(partition_group(ColumnRef::by_name(p.substr(0, colon)), k));
        }
        // Column labels of boxes given by 1-based index become names.
        for (auto& g : out_groups) {
            for (auto& label : g.conditioning) {
                for (const auto& box : g.boxes)
                    for (const auto& b : box.bounds)
                        if (b.col.label() == label) label = dataset.name(b.col.resolve(dataset));
            }
        }
        return out_groups;
    }

    std::vector<std::size_t> x_columns(const Dataset& dataset, const EventGroup* g) const {
        std::vector<std::size_t> cols;
        if (!x.empty()) {
            for (const auto& name : x) cols.push_back(dataset.column_index(name));
            return cols;
        }
        for (std::size_t k = 0; k < dataset.cols(); ++k) {
            const auto& name = dataset.name(k);
            const bool cond =
                g && std::find(g->conditioning.begin(), g->conditioning.end(), name) != g->conditioning.end();
            if (!cond) cols.push_back(k);
        }
        return cols;
    }
};

struct Task {
    std::size_t group = 0;
    std::vector<std::size_t> x;
};

std::vector<Task> make_tasks(const DataOptions& opt, const Dataset& data, const std::vector<EventGroup>& groups,
                             bool pairs) {
    std::vector<Task> tasks;
    for (std::size_t g = 0; g < groups.size(); ++g) {
        auto cols = opt.x_columns(data, &groups[g]);
        if (pairs) {
            std::vector<std::size_t> keep;
            for (std::size_t c : cols) {
                const auto& cond = groups[g].conditioning;
                if (std::find(cond.begin(), cond.end(), data.name(c)) == cond.end()) keep.push_back(c);
            }
            for (std::size_t a = 0; a < keep.size(); ++a)
                for (std::size_t b = a + 1; b < keep.size(); ++b) tasks.push_back({g, {keep[a], keep[b]}});
        } else {
            if (cols.empty()) throw InvalidSpec("no X columns left after removing conditioning columns");
            tasks.push_back({g, cols});
        }
    }
    if (tasks.empty()) throw InvalidSpec("no X column pairs to estimate");
    return tasks;
}

std::vector<std::string> names_of(const Dataset& data, const std::vector<std::size_t>& cols) {
    std::vector<std::string> v;
    for (std::size_t c : cols) v.push_back(data.name(c));
    return v;
}

std::vector<std::vector<ResolvedEvent>> resolve_groups(const std::vector<EventGroup>& groups, const Dataset& data) {
    std::vector<std::vector<ResolvedEvent>> out;
    for (const auto& g : groups) out.push_back(resolve_family(g.boxes, data));
    return out;
}

QuadratureConfig quadrature_config(const std::string& method, std::size_t grid_res) {
    QuadratureConfig q;
    if (method == "grid") q.method = IntegrationMethod::Grid;
    else if (method == "qmc") q.method = IntegrationMethod::QMC;
    else if (method == "closed") q.method = IntegrationMethod::ClosedForm;
    if (grid_res > 0) q.grid_knots = grid_res;
    return q;
}

std::vector<std::string> all_labels(const std::vector<EventGroup>& groups) {
    std::vector<std::string> labels;
    for (const auto& g : groups)
        for (const auto& l : g.labels)
            if (std::find(labels.begin(), labels.end(), l) == labels.end()) labels.push_back(l);
    return labels;
}

void emit(const std::string& out_dir, const std::string& file, const std::string& content, std::ostream& out) {
    if (out_dir.empty()) {
        out << content;
    } else {
        write_atomic(fs::path(out_dir) / file, content);
    }
}

std::string replicate_csv(const BootstrapDraws& draws, const std::vector<std::string>& header) {
    std::string s;
    for (std::size_t j = 0; j < header.size(); ++j) s += (j ? "," : "") + csv_cell(header[j]);
    s += '\n';
    for (std::size_t r = 0; r < draws.M; ++r) {
        for (std::size_t j = 0; j < draws.dim; ++j) s += (j ? "," : "") + format_double(draws.at(r, j));
        s += '\n';
    }
    return s;
}

// -- estimate ------------------------------------------------------------------------------

struct EstimateOptions {
    DataOptions data;
    std::vector<std::string> measures{"kendall"};
    std::string scheme = "multiplier";
    std::size_t M = 500;
    double level = 0.95;
    std::uint64_t seed = 1;
    std::size_t grid_res = 0;
    std::string quadrature = "auto";
    bool pairs = false;
    bool dump = false;
};

void add_boot_options(CLI::App* app, std::string& scheme, std::size_t& M, std::uint64_t& seed) {
    app->add_option("--boot-scheme", scheme, "multinomial, multiplier, dirichlet or nonparametric")
        ->check(CLI::IsMember({"multinomial", "multiplier", "dirichlet", "nonparametric"}));
    app->add_option("--boot-reps", M, "bootstrap replicates M");
    app->add_option("--seed", seed, "master seed");
}

int cmd_estimate(const EstimateOptions& o, std::ostream& out) {
    const Dataset data = o.data.load();
    auto groups = o.data.groups(data);
    if (groups.empty()) groups.push_back(EventGroup{{BoxSpec{"all", {}}}, {"all"}, {}, {0}});
    const auto resolved = resolve_groups(groups, data);
    const auto tasks = make_tasks(o.data, data, groups, o.pairs);
    if (!(o.level > 0.0 && o.level < 1.0)) throw InvalidSpec("--level must lie in (0, 1)");

    std::vector<Json> measure_args;
    for (const auto& m : o.measures) measure_args.push_back(json_argument(m));
    for (const auto& t : tasks)
        for (const auto& m : measure_args) (void)parse_measure(m, t.x.size());
    const QuadratureConfig quad = quadrature_config(o.quadrature, o.grid_res);
    (void)boot_config(o.scheme, o.M, o.seed);

    struct Slot {
        std::vector<std::string> lines;
        std::vector<std::string> wide;
        std::vector<std::pair<std::string, std::string>> replicates;
    };
    const auto labels = all_labels(groups);
    std::vector<Slot> slots(tasks.size());

    parallel_for(tasks.size(), o.data.threads, [&](std::size_t t) {
        const auto& task = tasks[t];
        const auto& group = groups[task.group];
        const auto& events = resolved[task.group];
        const auto xnames = names_of(data, task.x);
        for (std::size_t mi = 0; mi < measure_args.size(); ++mi) {
            const MeasureSpec spec = parse_measure(measure_args[mi], task.x.size());
            const MeasureSpec specs[] = {spec};
            const auto est = estimate_rho_family(data, task.x, specs, events, quad);
            BootstrapDraws draws;
            if (o.M > 0) {
                BootstrapConfig cfg = boot_config(o.scheme, o.M, stream_seed(stream_seed(o.seed, t), mi));
                cfg.quadrature.method = quad.method;
                cfg.quadrature.grid_knots = quad.grid_knots;
                draws = boot_measures(data, task.x, events, specs, cfg);
            }
            std::map<std::string, std::array<std::string, 3>> cells;
            for (std::size_t j = 0; j < events.size(); ++j) {
                const auto& r = est[j];
                Json rec;
                rec["command"] = "estimate";
                rec["x"] = xnames;
                rec["conditioning"] = group.conditioning;
                rec["event"] = events[j].name;
                rec["label"] = group.labels[j];
                rec["measure"] = spec.label;
                rec["estimate"] = r.estimate;
                double lo = NAN, hi = NAN;
                if (o.M > 0) {
                    const auto col = draws.column(j);
                    std::tie(lo, hi) = percentile_ci(r.estimate, col, data.rows(), o.level);
                }
                rec["ci_lower"] = number_or_null(lo);
                rec["ci_upper"] = number_or_null(hi);
                rec["level"] = o.level;
                rec["n"] = r.n;
                rec["n_A"] = r.n_A;
                rec["p_hat"] = r.p_hat;
                rec["method"] = to_string(r.method);
                rec["boot_scheme"] = o.M > 0 ? o.scheme : std::string("none");
                rec["boot_reps"] = o.M;
                rec["boot_failed"] = draws.failed;
                rec["seed"] = o.seed;
                rec["box"] = box_json(events[j], data);
                slots[t].lines.push_back(rec.dump());
                cells[group.labels[j]] = {format_double(r.estimate), std::isfinite(lo) ? format_double(lo) : "",
                                          std::isfinite(hi) ? format_double(hi) : ""};
            }
            std::string row = csv_cell(join(xnames, "|")) + "," + csv_cell(join(group.conditioning, "|")) + "," +
                              csv_cell(spec.label);
            for (const auto& l : labels) {
                auto it = cells.find(l);
                if (it == cells.end()) row += ",,,";
                else row += "," + it->second[0] + "," + it->second[1] + "," + it->second[2];
            }
            slots[t].wide.push_back(row);
            if (o.dump && o.M > 0) {
                std::vector<std::string> header;
                for (const auto& e : events) header.push_back(e.name);
                slots[t].replicates.emplace_back(
                    "replicates/" + safe_name(join(xnames, "-") + "__" + join(group.conditioning, "-") + "__" +
                                              spec.label) + ".csv",
                    replicate_csv(draws, header));
            }
        }
    });

    std::string jsonl, wide = "x,conditioning,measure";
    for (const auto& l : labels) wide += "," + csv_cell(l) + "," + csv_cell(l + "_lo") + "," + csv_cell(l + "_hi");
    wide += '\n';
    for (const auto& s : slots) {
        for (const auto& l : s.lines) jsonl += l + '\n';
        for (const auto& w : s.wide) wide += w + '\n';
    }
    emit(o.data.out, "estimate.jsonl", jsonl, out);
    if (!o.data.out.empty()) {
        write_atomic(fs::path(o.data.out) / "estimate_wide.csv", wide);
        for (const auto& s : slots)
            for (const auto& [file, content] : s.replicates) write_atomic(fs::path(o.data.out) / file, content);
    }
    return 0;
}

// -- test ----------------------------------------------------------------------------------

struct TestOptions {
    DataOptions data;
    std::string measure = "kendall";
    std::string kind = "cvm";
    std::string scheme = "multiplier";
    std::size_t M = 500;
    std::uint64_t seed = 1;
    bool all_pairs = false;
    bool dump = false;
};

int cmd_test(const TestOptions& o, std::ostream& out) {
    const Dataset data = o.data.load();
    const auto groups = o.data.groups(data);
    if (groups.size() != 1) throw InvalidSpec("test needs exactly one family of events (got " +
                                              std::to_string(groups.size()) + ")");
    const auto events = resolve_family(groups[0].boxes, data);
    const auto x = o.data.x_columns(data, &groups[0]);
    const MeasureSpec spec = parse_measure(json_argument(o.measure), x.size());
    std::vector<StatKind> kinds;
    if (o.kind == "both") kinds = {StatKind::CvM, StatKind::KS};
    else kinds = {stat_kind_from_string(o.kind)};
    const BootstrapConfig cfg = boot_config(o.scheme, o.M, o.seed);
    const auto results = test_equality_kinds(data, x, events, spec, kinds, cfg, o.all_pairs);

    std::string jsonl;
    for (const auto& r : results) {
        Json rec;
        rec["command"] = "test";
        rec["kind"] = to_string(r.kind);
        rec["observed"] = r.observed;
        rec["p_value"] = r.p_value;
        rec["m"] = r.m;
        rec["all_pairs"] = r.all_pairs;
        rec["measure"] = spec.label;
        rec["x"] = names_of(data, x);
        rec["boot_scheme"] = o.scheme;
        rec["boot_reps"] = o.M;
        rec["boot_failed"] = r.boot.failed;
        rec["seed"] = o.seed;
        Json evs = Json::array();
        for (std::size_t j = 0; j < events.size(); ++j) {
            evs.push_back({{"event", events[j].name},
                           {"n_A", events[j].n_A},
                           {"p_hat", events[j].p_hat},
                           {"estimate", r.estimates[j]},
                           {"box", box_json(events[j], data)}});
        }
        rec["events"] = evs;
        jsonl += rec.dump() + '\n';
    }
    out << jsonl;
    if (!o.data.out.empty()) {
        write_atomic(fs::path(o.data.out) / "test.jsonl", jsonl);
        if (o.dump)
            for (const auto& r : results)
                write_atomic(fs::path(o.data.out) / ("replicates_" + to_string(r.kind) + ".csv"),
                             replicate_csv(r.boot, {"T_star"}));
    }
    return 0;
}

// -- tau-baseline --------------------------------------------------------------------------

int cmd_tau_baseline(const DataOptions& o, std::ostream& out) {
    const Dataset data = o.load();
    auto groups = o.groups(data);
    const bool unconditional_only = groups.empty();
    if (unconditional_only) groups.push_back(EventGroup{{BoxSpec{"all", {}}}, {"all"}, {}, {}});
    const auto resolved = resolve_groups(groups, data);
    const auto tasks = make_tasks(o, data, groups, true);
    const auto labels = all_labels(groups);

    // Unconditional values are shared by every group that contains the pair.
    std::map<std::pair<std::size_t, std::size_t>, double> uncond;
    for (const auto& t : tasks) uncond[{t.x[0], t.x[1]}] = 0.0;
    std::vector<std::pair<std::size_t, std::size_t>> keys;
    for (const auto& [k, v] : uncond) keys.push_back(k);
    parallel_for(keys.size(), o.threads, [&](std::size_t i) {
        uncond[keys[i]] = kendall_v(data.column(keys[i].first), data.column(keys[i].second));
    });

    std::vector<std::string> lines(tasks.size()), wide(tasks.size());
    parallel_for(tasks.size(), o.threads, [&](std::size_t t) {
        const auto& task = tasks[t];
        const auto& group = groups[task.group];
        const auto& events = resolved[task.group];
        const auto x = data.column(task.x[0]), y = data.column(task.x[1]);
        Json rec;
        rec["command"] = "tau-baseline";
        rec["x"] = names_of(data, task.x);
        rec["conditioning"] = group.conditioning;
        const double tau = uncond.at({task.x[0], task.x[1]});
        rec["unconditional_tau"] = tau;
        std::map<std::string, double> cond;
        if (!unconditional_only) {
            Json c = Json::array();
            for (std::size_t j = 0; j < events.size(); ++j) {
                const auto sub = data.select_rows(events[j].members);
                const double v = kendall_v(sub.column(task.x[0]), sub.column(task.x[1]));
                cond[group.labels[j]] = v;
                c.push_back({{"event", events[j].name}, {"label", group.labels[j]}, {"tau", v}, {"n_A", events[j].n_A}});
            }
            rec["conditional"] = c;
        }
        std::vector<ResolvedEvent> part;
        for (std::size_t k : group.partition) part.push_back(events[k]);
        if (part.empty() && is_partition(events)) part = events;
        std::string reconstructed, hull;
        if (!unconditional_only && !part.empty() && is_partition(part)) {
            const auto d = decompose_tau(x, y, part);
            Json dj;
            Json names = Json::array();
            for (const auto& e : part) names.push_back(e.name);
            dj["events"] = names;
            dj["weights"] = d.weights;
            Json co = Json::array();
            for (std::size_t k = 0; k < part.size(); ++k)
                co.push_back(std::vector<double>(d.co_tau.begin() + k * part.size(),
                                                 d.co_tau.begin() + (k + 1) * part.size()));
            dj["co_tau"] = co;
            dj["reconstructed"] = d.reconstructed;
            rec["decomposition"] = dj;
            rec["outside_hull"] = d.outside_hull;
            reconstructed = format_double(d.reconstructed);
            hull = d.outside_hull ? "true" : "false";
        }
        lines[t] = rec.dump();
        std::string row = csv_cell(join(names_of(data, task.x), "|")) + "," +
                          csv_cell(join(group.conditioning, "|")) + "," + format_double(tau);
        for (const auto& l : labels) {
            auto it = cond.find(l);
            row += "," + (it == cond.end() ? std::string{} : format_double(it->second));
        }
        wide[t] = row + "," + reconstructed + "," + hull;
    });

    std::string jsonl, csv = "x,conditioning,unconditional";
    for (const auto& l : labels) csv += "," + csv_cell(l);
    csv += ",reconstructed,outside_hull\n";
    for (std::size_t t = 0; t < tasks.size(); ++t) {
        jsonl += lines[t] + '\n';
        csv += wide[t] + '\n';
    }
    emit(o.out, "tau_baseline.jsonl", jsonl, out);
    if (!o.out.empty()) write_atomic(fs::path(o.out) / "tau_baseline_wide.csv", csv);
    return 0;
}

// -- simulate ------------------------------------------------------------------------------

struct SimulateOptions {
    std::string study;
    std::string config;
    std::string out;
};

Json dgp_json(const DGPSpec& d) {
    Json j;
    switch (d.kind) {
        case DGPKind::IndependenceAll: j["kind"] = "independence"; break;
        case DGPKind::GaussianCopula: j["kind"] = "gaussian"; break;
        case DGPKind::ClaytonPair: j["kind"] = "clayton"; break;
    }
    j["p"] = d.p;
    j["q"] = d.q;
    if (d.kind == DGPKind::GaussianCopula) {
        j["R"] = d.R;
        j["link"] = d.link == ZLink::Independent ? "independent" : d.link == ZLink::ZIsX ? "z_is_x" : "z_correlated";
        j["rho_z"] = d.rho_z;
        j["z_source"] = d.z_source + 1;
    }
    if (d.kind == DGPKind::ClaytonPair) {
        j["theta_in"] = d.theta_in;
        j["theta_out"] = d.theta_out;
        j["regime"] = {d.regime_lo, d.regime_hi};
    }
    j["n"] = d.n;
    j["seed"] = d.seed;
    return j;
}

BootstrapConfig study_boot(const Json& cfg, const DGPSpec& dgp) {
    const Json b = cfg.value("boot", Json::object());
    return boot_config(b.value("scheme", std::string("multiplier")), b.value("reps", std::size_t{500}),
                       b.value("seed", stream_seed(dgp.seed, 0xB0)));
}

int cmd_simulate(const SimulateOptions& o, std::ostream& out) {
    const Json cfg = read_json_file(o.config);
    if (!cfg.contains("dgp")) throw InvalidSpec(o.config + ": missing \"dgp\"");
    const DGPSpec dgp = parse_dgp(cfg.at("dgp"));
    const std::size_t reps = cfg.value("reps", std::size_t{100});
    Json rep;
    rep["study"] = o.study;
    rep["dgp"] = dgp_json(dgp);

    if (o.study == "sample") {
        std::ostringstream csv;
        write_csv(csv, simulate(dgp));
        emit(o.out, "sample.csv", csv.str(), out);
        return 0;
    }
    if (o.study == "convergence") {
        const BoxSpec event = parse_study_event(cfg.value("event", Json("all")), dgp);
        const auto ns = cfg.value("ns", std::vector<std::size_t>{250, 1000, 4000});
        const auto r = convergence_study(dgp, event, ns, reps, cfg.value("grid", std::size_t{20}));
        rep["event"] = event.name;
        rep["ns"] = r.ns;
        rep["reps"] = r.reps;
        rep["median_distance"] = r.median_distance;
        rep["median_copula_error"] = r.median_copula_error;
        rep["paired_improvements"] = r.paired_improvements;
        rep["invariant_failures"] = r.invariant_failures;
        rep["distance_strictly_decreasing"] = r.distance_strictly_decreasing;
        rep["copula_error_strictly_decreasing"] = r.copula_error_strictly_decreasing;
    } else if (o.study == "coverage" || o.study == "validity") {
        const BoxSpec event = parse_study_event(cfg.value("event", Json("all")), dgp);
        const MeasureSpec spec = parse_measure(cfg.value("measure", Json("kendall")), dgp.p);
        const BootstrapConfig boot = study_boot(cfg, dgp);
        rep["event"] = event.name;
        rep["measure"] = spec.label;
        rep["boot_reps"] = boot.M;
        rep["boot_scheme"] = boot.method == BootMethod::Nonparametric ? std::string("nonparametric") : boot.scheme.name();
        if (o.study == "coverage") {
            const auto r = coverage_study(dgp, event, spec, boot, cfg.value("level", 0.95), reps);
            rep["true_value"] = r.true_value;
            rep["reps"] = r.reps;
            rep["covered"] = r.covered;
            rep["coverage"] = r.coverage;
            rep["std_error"] = r.std_error;
            rep["mean_width"] = r.mean_width;
            rep["level"] = r.level;
        } else {
            const auto r = bootstrap_validity_study(dgp, event, spec, boot, cfg.value("mc_reps", std::size_t{500}));
            rep["true_value"] = r.true_value;
            rep["kolmogorov_distance"] = r.kolmogorov_distance;
            rep["boot_sd"] = r.boot_sd;
            rep["mc_sd"] = r.mc_sd;
            rep["boot_mean"] = r.boot_mean;
            rep["mc_mean"] = r.mc_mean;
            rep["centred_distance"] = r.centred_distance;
            rep["mc_reps"] = r.mc_reps;
        }
    } else if (o.study == "level" || o.study == "power") {
        std::vector<BoxSpec> events;
        if (cfg.contains("events")) {
            const auto groups = parse_events(cfg.at("events"));
            events = groups.at(0).boxes;
        } else {
            events = quantile_partition(ColumnRef::by_index(dgp.z_col()), cfg.value("parts", std::size_t{3}));
        }
        const MeasureSpec spec = parse_measure(cfg.value("measure", Json("kendall")), dgp.p);
        const BootstrapConfig boot = study_boot(cfg, dgp);
        const auto r = rejection_study(dgp, events, spec, boot, cfg.value("alpha", 0.05), reps);
        rep["measure"] = spec.label;
        rep["events"] = events.size();
        rep["boot_reps"] = boot.M;
        rep["reps"] = r.reps;
        rep["alpha"] = r.alpha;
        Json rates;
        for (std::size_t k = 0; k < r.kinds.size(); ++k) {
            rates[to_string(r.kinds[k])] = {{"rejections", r.rejections[k]}, {"rate", r.rejection_rate[k]}};
        }
        rep["rejection"] = rates;
    } else if (o.study == "covariance") {
        const BoxSpec event = parse_study_event(cfg.value("event", Json("all")), dgp);
        std::vector<double> points;
        if (cfg.contains("points")) {
            for (const auto& pt : cfg.at("points"))
                for (double v : pt.get<std::vector<double>>()) points.push_back(v);
        } else {
            const std::size_t g = cfg.value("grid_points", std::size_t{5});
            const std::size_t total = static_cast<std::size_t>(std::pow(g, dgp.p));
            for (std::size_t f = 0; f < total; ++f) {
                std::size_t rem = f;
                std::vector<double> u(dgp.p);
                for (std::size_t k = dgp.p; k-- > 0;) {
                    u[k] = static_cast<double>(rem % g + 1) / static_cast<double>(g + 1);
                    rem /= g;
                }
                points.insert(points.end(), u.begin(), u.end());
            }
        }
        const BootstrapConfig boot = study_boot(cfg, dgp);
        const auto r = covariance_study(dgp, event, points, boot, cfg.value("threshold", 0.01),
                                        cfg.value("tolerance", 0.2));
        rep["event"] = event.name;
        rep["points"] = r.points;
        rep["boot_reps"] = boot.M;
        rep["compared"] = r.compared;
        rep["within_tolerance"] = r.within_tolerance;
        rep["max_relative_error"] = r.max_relative_error;
        rep["median_relative_error"] = r.median_relative_error;
        rep["max_abs_error"] = r.max_abs_error;
        rep["plugin"] = r.plugin;
        rep["bootstrap"] = r.bootstrap;
    } else {
        throw InvalidSpec("unknown study '" + o.study + "'");
    }
    const std::string text = rep.dump(2) + '\n';
    out << text;
    if (!o.out.empty()) write_atomic(fs::path(o.out) / (o.study + "_report.json"), text);
    return 0;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Conditional copulas given a box event: estimation, bootstrap and equality tests"};
    app.require_subcommand(1);

    EstimateOptions est;
    auto* e = app.add_subcommand("estimate", "conditional dependence measures with bootstrap intervals");
    est.data.add(e);
    e->add_option("--measure", est.measures, "preset name, JSON file or inline JSON (repeatable)");
    add_boot_options(e, est.scheme, est.M, est.seed);
    e->add_option("--level", est.level, "confidence level");
    e->add_option("--grid-res", est.grid_res, "knots per dimension for grid integration");
    e->add_option("--quadrature", est.quadrature, "auto, closed, grid or qmc")
        ->check(CLI::IsMember({"auto", "closed", "grid", "qmc"}));
    e->add_flag("--pairs", est.pairs, "one estimate per pair of X columns");
    e->add_flag("--dump-replicates", est.dump, "write bootstrap replicate matrices");

    TestOptions tst;
    auto* t = app.add_subcommand("test", "test equality of conditional copulas across events");
    tst.data.add(t);
    t->add_option("--measure", tst.measure, "preset name, JSON file or inline JSON");
    t->add_option("--kind", tst.kind, "cvm, ks or both")->check(CLI::IsMember({"cvm", "ks", "both"}));
    t->add_flag("--all-pairs", tst.all_pairs, "contrast every pair of events");
    t->add_flag("--dump-replicates", tst.dump, "write bootstrap statistics");
    add_boot_options(t, tst.scheme, tst.M, tst.seed);

    SimulateOptions sim;
    auto* s = app.add_subcommand("simulate", "Monte Carlo studies on known laws");
    s->add_option("--study", sim.study, "sample, convergence, coverage, validity, level, power or covariance")
        ->required()
        ->check(CLI::IsMember({"sample", "convergence", "coverage", "validity", "level", "power", "covariance"}));
    s->add_option("--config", sim.config, "study JSON")->required();
    s->add_option("--out", sim.out, "output directory");

    DataOptions base;
    auto* b = app.add_subcommand("tau-baseline", "unconditional Kendall's tau and its split over a partition");
    base.add(b);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& ex) {
        const int code = app.exit(ex, out, err);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*e) return cmd_estimate(est, out);
        if (*t) return cmd_test(tst, out);
        if (*s) return cmd_simulate(sim, out);
        if (*b) return cmd_tau_baseline(base, out);
    } catch (const EmptyEvent& ex) {
        err << "error: " << ex.what() << '\n';
        return 3;
    } catch (const InvalidSpec& ex) {
        err << "configuration error: " << ex.what() << '\n';
        return 2;
    } catch (const DataError& ex) {
        err << "data error: " << ex.what() << '\n';
        return 2;
    } catch (const Json::exception& ex) {
        err << "configuration error: " << ex.what() << '\n';
        return 2;
    } catch (const std::exception& ex) {
        err << "error: " << ex.what() << '\n';
        return 1;
    }
    return 2;
}

}  // namespace condcop::cli
