#pragma once

#include "condcop/bootstrap.hpp"
#include "condcop/measures.hpp"

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace condcop {

enum class StatKind { CvM, KS };
std::string to_string(StatKind k);
StatKind stat_kind_from_string(const std::string& s);

struct TestResult {
    StatKind kind = StatKind::CvM;
    double observed = 0.0;
    BootstrapDraws boot;  ///< one column holding T*_r
    double p_value = 1.0;
    std::size_t m = 0;
    MeasureSpec spec;
    std::vector<double> estimates;  ///< reported-scale measure per event
    bool all_pairs = false;
};

/// Contrast statistic from per-event values x_j on the sqrt(n) scale:
/// CvM sums squared differences, KS takes the largest absolute difference, over j >= 2
/// against the first event, or over all pairs i < j.
double contrast_statistic(std::span<const double> x, StatKind kind, bool all_pairs = false);

/// (1 + #{draws >= observed}) / (M + 1).
double bootstrap_pvalue(double observed, std::span<const double> draws);

/// Test of equal conditional copulas across m >= 2 events through one shared measure.
TestResult test_equality(const Dataset& data, std::span<const std::size_t> x_cols,
                         std::span<const ResolvedEvent> events, const MeasureSpec& spec, StatKind kind,
                         const BootstrapConfig& config, bool all_pairs = false);

/// Several statistics sharing one estimate and one set of bootstrap draws.
std::vector<TestResult> test_equality_kinds(const Dataset& data, std::span<const std::size_t> x_cols,
                                            std::span<const ResolvedEvent> events, const MeasureSpec& spec,
                                            std::span<const StatKind> kinds, const BootstrapConfig& config,
                                            bool all_pairs = false);

}  // namespace condcop
