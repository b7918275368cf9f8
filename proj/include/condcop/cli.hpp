#pragma once

#include "condcop/bootstrap.hpp"
#include "condcop/dataset.hpp"
#include "condcop/events.hpp"
#include "condcop/measures.hpp"
#include "condcop/mcsim.hpp"

#include <json.hpp>

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

namespace condcop::cli {

using Json = nlohmann::ordered_json;

enum class DateColumn { Auto, Yes, No };

/// Header row, then numeric rows. With Auto the first column is dropped when its header names a
/// date or time, or when its first cell is not a number. Any other non-numeric or non-finite cell
/// raises DataError naming the line and column.
Dataset parse_csv(std::istream& in, DateColumn date = DateColumn::Auto, const std::string& source = "input");
Dataset read_csv(const std::string& path, DateColumn date = DateColumn::Auto);
void write_csv(std::ostream& out, const Dataset& data);

/// Events sharing one conditioning role. `labels` are short names comparable across groups.
struct EventGroup {
    std::vector<BoxSpec> boxes;
    std::vector<std::string> labels;
    std::vector<std::string> conditioning;  ///< column labels used by the boxes
    /// Indices into boxes of a sub-family forming a partition of the sample, when known.
    std::vector<std::size_t> partition;
};

/// Column given as a name or a 1-based position.
ColumnRef parse_column(const Json& j);
/// An array of events, {"events": [...]}, or a single event. Items are
/// {"name", "bounds": [{"col", "lower": {"quantile"|"value", "inclusive"}, "upper": ...}]},
/// {"pipeline": col} (the nine quantile boxes) or {"partition": {"col", "parts"|"levels"}}.
std::vector<EventGroup> parse_events(const Json& j);
/// Nine-box group on one column; its partition sub-family is A3, A5, A6.
EventGroup pipeline_group(const ColumnRef& col);
EventGroup partition_group(const ColumnRef& col, std::size_t parts);

/// A preset name (kendall, spearman, blomqvist, gini) or
/// {"psi", "K", "Kprime", "u0", "v0", "weights", "scale", "shift", "label"} with 1-based K.
MeasureSpec parse_measure(const Json& j, std::size_t p);

/// multinomial, multiplier, dirichlet or nonparametric.
BootstrapConfig boot_config(const std::string& scheme, std::size_t M, std::uint64_t seed);

DGPSpec parse_dgp(const Json& j);
/// "all", {"z", "lower", "upper"} on population quantiles, or a value-bound event.
BoxSpec parse_study_event(const Json& j, const DGPSpec& dgp);

/// V-statistic Kendall's tau n^-2 sum_{i,j} sign((x_i - x_j)(y_i - y_j)) and its split over a
/// partition: tau = sum_{k,l} w_k w_l tau_{k,l}, where tau_{k,l} averages over i in A_k, j in A_l.
struct TauDecomposition {
    double tau = 0.0;
    std::vector<double> weights;
    std::vector<double> co_tau;  ///< k x k row-major, diagonal = within-box taus
    double reconstructed = 0.0;
    /// tau lies outside [min_k tau_kk, max_k tau_kk].
    bool outside_hull = false;
};
double kendall_v(std::span<const double> x, std::span<const double> y);
TauDecomposition decompose_tau(std::span<const double> x, std::span<const double> y,
                               std::span<const ResolvedEvent> partition);

/// Whether the masks are pairwise disjoint and cover every row.
bool is_partition(std::span<const ResolvedEvent> events);

/// Shortest round-trip decimal form.
std::string format_double(double v);

/// Entry point: returns the process exit code (0 success, 1 runtime error, 2 configuration
/// error, 3 empty event).
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace condcop::cli
