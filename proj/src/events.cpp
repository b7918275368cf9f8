#include "condcop/events.hpp"

#include "condcop/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace condcop {

std::size_t ColumnRef::resolve(const Dataset& data) const {
    if (index) {
        if (*index >= data.cols()) {
            throw InvalidSpec("column index " + std::to_string(*index) + " out of range");
        }
        return *index;
    }
    return data.column_index(name);
}

std::string ColumnRef::label() const { return index ? std::to_string(*index) : name; }

double empirical_quantile_sorted(std::span<const double> sorted, double level) {
    if (sorted.empty()) throw InvalidSpec("quantile of an empty column");
    if (!(level >= 0.0 && level <= 1.0)) {
        throw InvalidSpec("quantile level " + std::to_string(level) + " outside [0,1]");
    }
    const std::size_t n = sorted.size();
    const double nd = static_cast<double>(n);
    std::size_t j = static_cast<std::size_t>(std::ceil(level * nd));
    j = std::clamp<std::size_t>(j, 1, n);
    while (j > 1 && static_cast<double>(j - 1) / nd >= level) --j;
    while (j < n && static_cast<double>(j) / nd < level) ++j;
    return sorted[j - 1];
}

double empirical_quantile(std::span<const double> values, double level) {
    std::vector<double> s(values.begin(), values.end());
    std::sort(s.begin(), s.end());
    return empirical_quantile_sorted(s, level);
}

namespace {

void check_level(const Bound& b, const std::string& event) {
    if (b.kind == BoundKind::Quantile && !(b.value >= 0.0 && b.value <= 1.0)) {
        throw InvalidSpec("event '" + event + "': quantile level " + std::to_string(b.value) +
                          " outside [0,1]");
    }
    if (b.kind == BoundKind::Value && std::isnan(b.value)) {
        throw InvalidSpec("event '" + event + "': NaN bound");
    }
}

}  // namespace

ResolvedEvent apply_box(const std::string& name, const std::vector<ResolvedBound>& box,
                        const Dataset& data) {
    ResolvedEvent ev;
    ev.name = name;
    ev.box = box;
    ev.n = data.rows();
    ev.member_mask.assign(ev.n, 1);
    for (const auto& b : box) {
        const auto col = data.column(b.col);
        for (std::size_t i = 0; i < ev.n; ++i) {
            if (ev.member_mask[i] && !b.contains(col[i])) ev.member_mask[i] = 0;
        }
    }
    for (std::size_t i = 0; i < ev.n; ++i) {
        if (ev.member_mask[i]) ev.members.push_back(i);
    }
    ev.n_A = ev.members.size();
    ev.p_hat = ev.n == 0 ? 0.0 : static_cast<double>(ev.n_A) / static_cast<double>(ev.n);
    return ev;
}

ResolvedEvent resolve_event(const BoxSpec& spec, const Dataset& data) {
    if (data.rows() == 0) throw InvalidSpec("event '" + spec.name + "': empty dataset");
    std::vector<ResolvedBound> box;
    for (const auto& bb : spec.bounds) {
        check_level(bb.lower, spec.name);
        check_level(bb.upper, spec.name);
        ResolvedBound rb;
        rb.col = bb.col.resolve(data);
        std::vector<double> sorted;
        auto quantile = [&](double level) {
            if (sorted.empty()) {
                const auto c = data.column(rb.col);
                sorted.assign(c.begin(), c.end());
                std::sort(sorted.begin(), sorted.end());
            }
            return empirical_quantile_sorted(sorted, level);
        };
        switch (bb.lower.kind) {
            case BoundKind::Unbounded:
                rb.lower = -std::numeric_limits<double>::infinity();
                rb.lower_inclusive = true;
                break;
            case BoundKind::Value:
                rb.lower = bb.lower.value;
                rb.lower_inclusive = bb.lower.inclusive.value_or(false);
                break;
            case BoundKind::Quantile:
                // inf{t : F_n(t) >= 0} is -infinity, so a 0%-anchored bound is closed below every point.
                rb.lower = bb.lower.value == 0.0 ? -std::numeric_limits<double>::infinity()
                                                 : quantile(bb.lower.value);
                rb.lower_inclusive = bb.lower.inclusive.value_or(bb.lower.value == 0.0);
                break;
        }
        switch (bb.upper.kind) {
            case BoundKind::Unbounded:
                rb.upper = std::numeric_limits<double>::infinity();
                rb.upper_inclusive = true;
                break;
            case BoundKind::Value:
                rb.upper = bb.upper.value;
                rb.upper_inclusive = bb.upper.inclusive.value_or(true);
                break;
            case BoundKind::Quantile:
                rb.upper = bb.upper.value == 0.0 ? -std::numeric_limits<double>::infinity()
                                                 : quantile(bb.upper.value);
                rb.upper_inclusive = bb.upper.inclusive.value_or(true);
                break;
        }
        if (rb.lower > rb.upper) {
            throw InvalidSpec("event '" + spec.name + "': lower bound exceeds upper bound on column " +
                              bb.col.label());
        }
        box.push_back(rb);
    }
    ResolvedEvent ev = apply_box(spec.name, box, data);
    if (ev.n_A == 0) throw EmptyEvent(spec.name, "no observation falls in the box");
    return ev;
}

std::vector<ResolvedEvent> resolve_family(std::span<const BoxSpec> specs, const Dataset& data) {
    std::vector<ResolvedEvent> out;
    out.reserve(specs.size());
    for (const auto& s : specs) out.push_back(resolve_event(s, data));
    return out;
}

BoxSpec quantile_box(const ColumnRef& col, double lower_level, double upper_level,
                     std::string name) {
    if (name.empty()) {
        name = col.label() + "[" + std::to_string(lower_level) + "," + std::to_string(upper_level) + "]";
    }
    return BoxSpec{std::move(name),
                   {BoxBound{col, Bound::at_quantile(lower_level), Bound::at_quantile(upper_level)}}};
}

std::vector<BoxSpec> quantile_partition(const ColumnRef& col, std::span<const double> levels) {
    if (levels.size() < 2) throw InvalidSpec("quantile partition needs at least two levels");
    std::vector<BoxSpec> out;
    for (std::size_t j = 0; j + 1 < levels.size(); ++j) {
        if (!(levels[j] < levels[j + 1])) throw InvalidSpec("quantile partition levels must increase");
        out.push_back(quantile_box(col, levels[j], levels[j + 1],
                                   col.label() + "_part" + std::to_string(j + 1)));
    }
    return out;
}

std::vector<BoxSpec> quantile_partition(const ColumnRef& col, std::size_t parts) {
    if (parts == 0) throw InvalidSpec("quantile partition needs at least one part");
    std::vector<double> levels(parts + 1);
    for (std::size_t j = 0; j <= parts; ++j) levels[j] = static_cast<double>(j) / static_cast<double>(parts);
    levels.back() = 1.0;
    return quantile_partition(col, levels);
}

std::vector<std::pair<int, int>> pipeline_box_levels() {
    return {{0, 5}, {0, 10}, {0, 20}, {5, 10}, {20, 80}, {80, 100}, {90, 100}, {90, 95}, {95, 100}};
}

std::vector<BoxSpec> pipeline_boxes(const ColumnRef& col) {
    std::vector<BoxSpec> out;
    int idx = 1;
    for (auto [lo, hi] : pipeline_box_levels()) {
        out.push_back(quantile_box(col, lo / 100.0, hi / 100.0,
                                   "A" + std::to_string(idx) + "_" + col.label()));
        ++idx;
    }
    return out;
}

}  // namespace condcop
