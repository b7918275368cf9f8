#include "condcop/cli.hpp"
#include "condcop/errors.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace condcop::cli {

namespace {

std::string trim(std::string_view s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return std::string(s.substr(a, b - a));
}

// Splits one CSV record; double-quoted fields may hold commas and "" escapes.
std::vector<std::string> split_record(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(trim(cur));
    return out;
}

bool parse_number(const std::string& s, double& v) {
    if (s.empty()) return false;
    const char* b = s.data();
    const char* e = b + s.size();
    if (*b == '+') ++b;
    auto [ptr, ec] = std::from_chars(b, e, v);
    return ec == std::errc{} && ptr == e && std::isfinite(v);
}

bool looks_like_date_header(std::string h) {
    std::transform(h.begin(), h.end(), h.begin(), [](unsigned char c) { return std::tolower(c); });
    return h == "date" || h == "time" || h == "datetime" || h == "timestamp" || h.empty();
}

std::size_t index_value(const Json& j, const char* what) {
    if (!j.is_number_integer() || j.get<long long>() < 1) {
        throw InvalidSpec(std::string(what) + " must be a positive 1-based integer");
    }
    return static_cast<std::size_t>(j.get<long long>() - 1);
}

Bound parse_bound(const Json& j, const Json& parent, const char* side) {
    if (j.is_null()) return Bound::none();
    std::optional<bool> incl;
    const std::string key = std::string(side) + "_inclusive";
    if (parent.contains(key)) incl = parent.at(key).get<bool>();
    if (j.is_number()) return Bound::at_value(j.get<double>(), incl);
    if (!j.is_object()) throw InvalidSpec(std::string("bound '") + side + "' must be an object, a number or null");
    if (j.contains("inclusive")) incl = j.at("inclusive").get<bool>();
    if (j.contains("quantile")) {
        const double q = j.at("quantile").get<double>();
        if (!(q >= 0.0 && q <= 1.0)) throw InvalidSpec("quantile level outside [0, 1]");
        return Bound::at_quantile(q, incl);
    }
    if (j.contains("value")) return Bound::at_value(j.at("value").get<double>(), incl);
    throw InvalidSpec(std::string("bound '") + side + "' needs \"quantile\" or \"value\"");
}

BoxSpec parse_box(const Json& j, std::size_t index) {
    BoxSpec box;
    box.name = j.value("name", std::string{});
    if (box.name.empty()) box.name = "event" + std::to_string(index + 1);
    if (!j.contains("bounds")) return box;
    if (!j.at("bounds").is_array()) throw InvalidSpec("event '" + box.name + "': \"bounds\" must be an array");
    for (const auto& b : j.at("bounds")) {
        if (!b.contains("col")) throw InvalidSpec("event '" + box.name + "': bound without \"col\"");
        BoxBound bb;
        bb.col = parse_column(b.at("col"));
        bb.lower = parse_bound(b.value("lower", Json{}), b, "lower");
        bb.upper = parse_bound(b.value("upper", Json{}), b, "upper");
        box.bounds.push_back(std::move(bb));
    }
    return box;
}

std::vector<std::size_t> parse_index_set(const Json& j, const char* what) {
    std::vector<std::size_t> out;
    if (j.is_null()) return out;
    if (!j.is_array()) throw InvalidSpec(std::string(what) + " must be an array");
    for (const auto& v : j) out.push_back(index_value(v, what));
    return out;
}

std::vector<double> parse_doubles(const Json& j, const char* what) {
    if (!j.is_array()) throw InvalidSpec(std::string(what) + " must be an array of numbers");
    return j.get<std::vector<double>>();
}

ZLink parse_link(const std::string& s) {
    if (s == "independent") return ZLink::Independent;
    if (s == "z_is_x") return ZLink::ZIsX;
    if (s == "z_correlated") return ZLink::ZCorrelated;
    throw InvalidSpec("unknown Z link '" + s + "' (independent, z_is_x, z_correlated)");
}

}  // namespace

Dataset parse_csv(std::istream& in, DateColumn date, const std::string& source) {
    std::string line;
    std::size_t line_no = 0;
    std::vector<std::string> header;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!trim(line).empty()) {
            header = split_record(line);
            break;
        }
    }
    if (header.empty()) throw DataError(source + ": missing header row");

    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> row_lines;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        auto rec = split_record(line);
        if (rec.size() != header.size()) {
            throw DataError(source + ": line " + std::to_string(line_no) + " has " + std::to_string(rec.size()) +
                            " fields, header has " + std::to_string(header.size()));
        }
        rows.push_back(std::move(rec));
        row_lines.push_back(line_no);
    }
    if (rows.empty()) throw DataError(source + ": no data rows");

    bool drop_first = date == DateColumn::Yes;
    if (date == DateColumn::Auto) {
        double v = 0;
        drop_first = looks_like_date_header(header[0]) || !parse_number(rows[0][0], v);
    }
    const std::size_t first = drop_first ? 1 : 0;
    if (first >= header.size()) throw DataError(source + ": no numeric columns");

    std::vector<std::string> names(header.begin() + static_cast<std::ptrdiff_t>(first), header.end());
    for (std::size_t k = 0; k < names.size(); ++k) {
        if (names[k].empty()) throw DataError(source + ": empty name for column " + std::to_string(k + first + 1));
        for (std::size_t l = 0; l < k; ++l) {
            if (names[l] == names[k]) throw DataError(source + ": duplicate column name '" + names[k] + "'");
        }
    }
    std::vector<std::vector<double>> cols(names.size(), std::vector<double>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t k = 0; k < names.size(); ++k) {
            const std::string& cell = rows[i][k + first];
            if (!parse_number(cell, cols[k][i])) {
                throw DataError(source + ": line " + std::to_string(row_lines[i]) + ", column " +
                                std::to_string(k + first + 1) + " ('" + names[k] + "'): non-numeric value '" +
                                cell + "'");
            }
        }
    }
    return Dataset(std::move(names), std::move(cols));
}

Dataset read_csv(const std::string& path, DateColumn date) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path + "'");
    return parse_csv(in, date, path);
}

void write_csv(std::ostream& out, const Dataset& data) {
    for (std::size_t k = 0; k < data.cols(); ++k) out << (k ? "," : "") << data.name(k);
    out << '\n';
    for (std::size_t i = 0; i < data.rows(); ++i) {
        for (std::size_t k = 0; k < data.cols(); ++k) out << (k ? "," : "") << format_double(data.at(i, k));
        out << '\n';
    }
}

std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    if (ec != std::errc{}) return "nan";
    return std::string(buf, ptr);
}

ColumnRef parse_column(const Json& j) {
    if (j.is_string()) return ColumnRef::by_name(j.get<std::string>());
    return ColumnRef::by_index(index_value(j, "column index"));
}

EventGroup pipeline_group(const ColumnRef& col) {
    EventGroup g;
    g.boxes = pipeline_boxes(col);
    for (std::size_t k = 0; k < g.boxes.size(); ++k) g.labels.push_back("A" + std::to_string(k + 1));
    g.conditioning = {col.label()};
    g.partition = {2, 4, 5};
    return g;
}

EventGroup partition_group(const ColumnRef& col, std::size_t parts) {
    EventGroup g;
    g.boxes = quantile_partition(col, parts);
    for (std::size_t k = 0; k < g.boxes.size(); ++k) {
        g.labels.push_back("part" + std::to_string(k + 1));
        g.partition.push_back(k);
    }
    g.conditioning = {col.label()};
    return g;
}

std::vector<EventGroup> parse_events(const Json& j) {
    const Json* list = &j;
    Json wrapped;
    if (j.is_object() && j.contains("events")) {
        list = &j.at("events");
    } else if (j.is_object()) {
        wrapped = Json::array({j});
        list = &wrapped;
    }
    if (!list->is_array()) throw InvalidSpec("events must be a JSON array or an object");

    std::vector<EventGroup> groups;
    EventGroup plain;
    std::size_t index = 0;
    for (const auto& item : *list) {
        if (!item.is_object()) throw InvalidSpec("each event must be a JSON object");
        if (item.contains("pipeline")) {
            groups.push_back(pipeline_group(parse_column(item.at("pipeline"))));
        } else if (item.contains("partition")) {
            const auto& p = item.at("partition");
            const ColumnRef col = parse_column(p.at("col"));
            if (p.contains("levels")) {
                EventGroup g;
                const auto levels = parse_doubles(p.at("levels"), "partition levels");
                g.boxes = quantile_partition(col, levels);
                for (std::size_t k = 0; k < g.boxes.size(); ++k) {
                    g.labels.push_back("part" + std::to_string(k + 1));
                    if (levels.front() == 0.0 && levels.back() == 1.0) g.partition.push_back(k);
                }
                g.conditioning = {col.label()};
                groups.push_back(std::move(g));
            } else {
                groups.push_back(partition_group(col, p.at("parts").get<std::size_t>()));
            }
        } else {
            BoxSpec box = parse_box(item, index);
            for (const auto& b : box.bounds) {
                const std::string l = b.col.label();
                if (std::find(plain.conditioning.begin(), plain.conditioning.end(), l) == plain.conditioning.end())
                    plain.conditioning.push_back(l);
            }
            plain.labels.push_back(box.name);
            plain.boxes.push_back(std::move(box));
        }
        ++index;
    }
    if (!plain.boxes.empty()) groups.insert(groups.begin(), std::move(plain));
    if (groups.empty()) throw InvalidSpec("no events given");
    return groups;
}

MeasureSpec parse_measure(const Json& j, std::size_t p) {
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s == "kendall") return MeasureSpec::kendall(p);
        if (s == "spearman") return MeasureSpec::spearman(p);
        if (s == "blomqvist") return MeasureSpec::blomqvist(p);
        if (s == "gini") {
            if (p != 2) throw InvalidSpec("gini measure needs two X columns");
            return MeasureSpec::gini();
        }
        throw InvalidSpec("unknown measure '" + s + "' (kendall, spearman, blomqvist, gini, or a JSON object)");
    }
    if (!j.is_object()) throw InvalidSpec("measure must be a preset name or a JSON object");
    if (j.contains("preset")) {
        MeasureSpec m = parse_measure(j.at("preset"), p);
        if (j.contains("label")) m.label = j.at("label").get<std::string>();
        return m;
    }
    MeasureSpec m;
    const std::string psi = j.value("psi", std::string("constant"));
    if (psi == "constant") {
        m.psi = Psi::constant();
    } else if (psi == "blomqvist") {
        m.psi = Psi::blomqvist();
    } else if (psi == "tail") {
        m.psi = Psi::tail(parse_doubles(j.at("u0"), "u0"), parse_doubles(j.at("v0"), "v0"));
    } else if (psi == "gini") {
        m.psi = Psi::gini();
    } else if (psi == "reflection") {
        std::vector<std::pair<std::vector<int>, double>> w;
        for (const auto& e : j.at("weights")) w.emplace_back(e.at("eps").get<std::vector<int>>(), e.at("w").get<double>());
        m.psi = Psi::reflection(std::move(w));
    } else {
        throw InvalidSpec("unknown psi '" + psi + "' (constant, blomqvist, tail, gini, reflection)");
    }
    m.K = parse_index_set(j.value("K", Json::array()), "K");
    m.K_prime = parse_index_set(j.value("Kprime", Json::array()), "Kprime");
    m.scale = j.value("scale", 1.0);
    m.shift = j.value("shift", 0.0);
    m.label = j.value("label", psi);
    m.validate(p);
    return m;
}

BootstrapConfig boot_config(const std::string& scheme, std::size_t M, std::uint64_t seed) {
    BootstrapConfig cfg;
    cfg.M = M;
    if (scheme == "multiplier") {
        cfg.scheme = WeightScheme::multiplier(seed);
    } else if (scheme == "multinomial") {
        cfg.scheme = WeightScheme::multinomial(seed);
    } else if (scheme == "dirichlet") {
        cfg.scheme = WeightScheme::dirichlet(seed);
    } else if (scheme == "nonparametric") {
        cfg.method = BootMethod::Nonparametric;
        cfg.scheme = WeightScheme::multinomial(seed);
    } else {
        throw InvalidSpec("unknown bootstrap scheme '" + scheme +
                          "' (multinomial, multiplier, dirichlet, nonparametric)");
    }
    cfg.quadrature.seed = stream_seed(seed, 0x51);
    return cfg;
}

DGPSpec parse_dgp(const Json& j) {
    if (!j.is_object()) throw InvalidSpec("\"dgp\" must be an object");
    const std::string kind = j.value("kind", std::string("gaussian"));
    const auto n = j.value("n", std::size_t{1000});
    const auto seed = j.value("seed", std::uint64_t{1});
    DGPSpec d;
    if (kind == "independence") {
        d = DGPSpec::independence(j.value("p", std::size_t{2}), j.value("q", std::size_t{1}), n, seed);
    } else if (kind == "gaussian") {
        const ZLink link = parse_link(j.value("link", std::string("independent")));
        const double rho_z = j.value("rho_z", 0.0);
        if (j.contains("R")) {
            const auto R = parse_doubles(j.at("R"), "R");
            const auto p = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(R.size()))));
            d = DGPSpec::gaussian(R, p, link, rho_z, n, seed);
        } else {
            d = DGPSpec::gaussian(j.value("rho", 0.5), link, rho_z, n, seed);
        }
        if (j.contains("z_source")) d.z_source = index_value(j.at("z_source"), "z_source");
    } else if (kind == "clayton") {
        const auto regime = j.value("regime", std::vector<double>{0.0, 1.0});
        if (regime.size() != 2) throw InvalidSpec("Clayton \"regime\" must be [lo, hi]");
        d = DGPSpec::clayton(j.value("theta_in", 2.0), j.value("theta_out", 0.0), regime[0], regime[1], n, seed);
    } else {
        throw InvalidSpec("unknown DGP kind '" + kind + "' (independence, gaussian, clayton)");
    }
    d.validate();
    return d;
}

BoxSpec parse_study_event(const Json& j, const DGPSpec& dgp) {
    if (j.is_null() || (j.is_string() && j.get<std::string>() == "all")) return BoxSpec{"all", {}};
    if (!j.is_object()) throw InvalidSpec("study event must be \"all\" or an object");
    if (j.contains("bounds")) return parse_box(j, 0);
    const std::size_t z = j.contains("z") ? index_value(j.at("z"), "z") : 0;
    return population_quantile_box(dgp, j.value("lower", 0.0), j.value("upper", 1.0), z, j.value("name", std::string{}));
}

}  // namespace condcop::cli
