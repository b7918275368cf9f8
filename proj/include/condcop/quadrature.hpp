#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace condcop {

/// Integration nodes on [0,1]^dim, row-major points, weights summing to 1.
struct QuadratureNodes {
    std::size_t dim = 0;
    std::vector<double> points;
    std::vector<double> weights;

    std::size_t size() const noexcept { return weights.size(); }
    const double* point(std::size_t r) const { return points.data() + r * dim; }
};

/// Tensor midpoint rule with g cells per dimension. dim = 0 gives one node of weight 1.
QuadratureNodes midpoint_nodes(std::size_t dim, std::size_t g);

/// First n points of the Sobol sequence with a seeded random shift modulo 1.
QuadratureNodes sobol_nodes(std::size_t dim, std::size_t n, std::uint64_t seed);

}  // namespace condcop
