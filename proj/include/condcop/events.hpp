#pragma once

#include "condcop/dataset.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace condcop {

enum class BoundKind { Unbounded, Value, Quantile };

/// One side of a coordinate interval, either a fixed value or an empirical quantile level.
struct Bound {
    BoundKind kind = BoundKind::Unbounded;
    double value = 0.0;  ///< the value itself, or the quantile level in [0,1]
    std::optional<bool> inclusive;

    static Bound none() { return {}; }
    static Bound at_value(double v, std::optional<bool> incl = std::nullopt) {
        return {BoundKind::Value, v, incl};
    }
    static Bound at_quantile(double level, std::optional<bool> incl = std::nullopt) {
        return {BoundKind::Quantile, level, incl};
    }
};

/// A dataset column addressed by index or by name.
struct ColumnRef {
    std::optional<std::size_t> index;
    std::string name;

    static ColumnRef by_index(std::size_t i) { return {i, {}}; }
    static ColumnRef by_name(std::string n) { return {std::nullopt, std::move(n)}; }
    std::size_t resolve(const Dataset& data) const;
    std::string label() const;
};

struct BoxBound {
    ColumnRef col;
    Bound lower;
    Bound upper;
};

/// A coordinate box over dataset columns. No bounds means the whole space.
struct BoxSpec {
    std::string name;
    std::vector<BoxBound> bounds;
};

struct ResolvedBound {
    std::size_t col = 0;
    double lower = 0.0;
    double upper = 0.0;
    bool lower_inclusive = false;
    bool upper_inclusive = true;

    bool contains(double x) const noexcept {
        const bool lo = lower_inclusive ? x >= lower : x > lower;
        const bool hi = upper_inclusive ? x <= upper : x < upper;
        return lo && hi;
    }
};

/// A box with all bounds fixed to values, and its membership in a given sample.
struct ResolvedEvent {
    std::string name;
    std::vector<ResolvedBound> box;
    std::vector<std::uint8_t> member_mask;
    std::vector<std::size_t> members;  ///< row indices with mask set, increasing
    std::size_t n = 0;
    std::size_t n_A = 0;
    double p_hat = 0.0;

    bool contains(std::size_t row) const { return member_mask[row] != 0; }
};

/// Type-1 empirical quantile: the smallest order statistic x_(j) with j/n >= level.
/// Level 0 gives the minimum.
double empirical_quantile(std::span<const double> values, double level);
double empirical_quantile_sorted(std::span<const double> sorted, double level);

/// Resolves quantile bounds against `data`, computes membership.
/// Throws EmptyEvent when no row belongs to the box.
ResolvedEvent resolve_event(const BoxSpec& spec, const Dataset& data);

/// Membership of an already resolved box in `data`; an empty result is not an error.
ResolvedEvent apply_box(const std::string& name, const std::vector<ResolvedBound>& box,
                        const Dataset& data);

std::vector<ResolvedEvent> resolve_family(std::span<const BoxSpec> specs, const Dataset& data);

/// Box on one column between two quantile levels, with the default closure.
BoxSpec quantile_box(const ColumnRef& col, double lower_level, double upper_level,
                     std::string name = {});

/// Consecutive quantile boxes between successive levels (levels sorted, from 0 to 1).
std::vector<BoxSpec> quantile_partition(const ColumnRef& col, std::span<const double> levels);
/// Partition into `parts` boxes of equal quantile width.
std::vector<BoxSpec> quantile_partition(const ColumnRef& col, std::size_t parts);

/// The nine quantile boxes of the financial-returns pipeline, on one conditioning column.
std::vector<BoxSpec> pipeline_boxes(const ColumnRef& col);

/// Quantile level pairs (in percent) of the nine pipeline boxes, in order.
std::vector<std::pair<int, int>> pipeline_box_levels();

}  // namespace condcop
