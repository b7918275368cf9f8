#include "condcop/cli.hpp"
#include "condcop/errors.hpp"

#include <algorithm>
#include <limits>

namespace condcop::cli {

namespace {

inline int sign_product(double dx, double dy) {
    const double s = dx * dy;
    return (s > 0) - (s < 0);
}

}  // namespace

double kendall_v(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.empty()) throw InvalidSpec("kendall_v: columns of different or zero length");
    const std::size_t n = x.size();
    long long s = 0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) s += sign_product(x[i] - x[j], y[i] - y[j]);
    return 2.0 * static_cast<double>(s) / (static_cast<double>(n) * static_cast<double>(n));
}

bool is_partition(std::span<const ResolvedEvent> events) {
    if (events.empty()) return false;
    const std::size_t n = events[0].n;
    for (std::size_t r = 0; r < n; ++r) {
        int hits = 0;
        for (const auto& e : events) hits += e.contains(r) ? 1 : 0;
        if (hits != 1) return false;
    }
    return true;
}

TauDecomposition decompose_tau(std::span<const double> x, std::span<const double> y,
                               std::span<const ResolvedEvent> partition) {
    if (!is_partition(partition)) throw InvalidSpec("decompose_tau: events do not partition the sample");
    const std::size_t n = x.size(), m = partition.size();
    if (y.size() != n || partition[0].n != n) throw InvalidSpec("decompose_tau: size mismatch");
    std::vector<std::size_t> box(n);
    for (std::size_t k = 0; k < m; ++k)
        for (std::size_t r : partition[k].members) box[r] = k;

    std::vector<long long> S(m * m, 0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const int s = sign_product(x[i] - x[j], y[i] - y[j]);
            S[box[i] * m + box[j]] += s;
            S[box[j] * m + box[i]] += s;
        }

    TauDecomposition d;
    d.weights.resize(m);
    d.co_tau.resize(m * m);
    long long total = 0;
    for (long long v : S) total += v;
    const double nn = static_cast<double>(n);
    d.tau = static_cast<double>(total) / (nn * nn);
    for (std::size_t k = 0; k < m; ++k) d.weights[k] = static_cast<double>(partition[k].n_A) / nn;
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (std::size_t k = 0; k < m; ++k)
        for (std::size_t l = 0; l < m; ++l) {
            const double nk = static_cast<double>(partition[k].n_A), nl = static_cast<double>(partition[l].n_A);
            const double t = nk > 0 && nl > 0 ? static_cast<double>(S[k * m + l]) / (nk * nl) : 0.0;
            d.co_tau[k * m + l] = t;
            d.reconstructed += d.weights[k] * d.weights[l] * t;
            if (k == l && nk > 0) {
                lo = std::min(lo, t);
                hi = std::max(hi, t);
            }
        }
    d.outside_hull = d.tau < lo || d.tau > hi;
    return d;
}

}  // namespace condcop::cli
