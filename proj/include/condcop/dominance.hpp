#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace condcop {

/// Integer points of a fixed dimension, stored row-major.
struct IntPoints {
    std::size_t dim = 0;
    std::vector<int> coords;

    IntPoints() = default;
    explicit IntPoints(std::size_t d) : dim(d) {}

    std::size_t size() const noexcept { return dim == 0 ? count_ : coords.size() / dim; }
    std::span<const int> operator[](std::size_t i) const { return {coords.data() + i * dim, dim}; }
    void push_back(std::span<const int> p);
    /// Zero-dimensional point sets only carry a count.
    void push_empty() { ++count_; }

private:
    std::size_t count_ = 0;
};

/// For each query q, the total weight of the points p with p_k <= q_k for every k.
///
/// One dimension uses a sorted prefix sum, two dimensions an offline Fenwick sweep,
/// higher dimensions direct counting.
std::vector<double> dominated_weight(const IntPoints& points, std::span<const double> weights,
                                     const IntPoints& queries);

/// Unit-weight variant of dominated_weight.
std::vector<double> dominated_count(const IntPoints& points, const IntPoints& queries);

/// For each point p, the total weight of the queries q with p_k <= q_k for every k.
std::vector<double> dominating_weight(const IntPoints& points, const IntPoints& queries,
                                      std::span<const double> query_weights);

}  // namespace condcop
