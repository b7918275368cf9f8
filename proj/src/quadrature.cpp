#include "condcop/quadrature.hpp"

#include "condcop/errors.hpp"
#include "condcop/rng.hpp"

#include <boost/random/sobol.hpp>

#include <cmath>
#include <random>

namespace condcop {

QuadratureNodes midpoint_nodes(std::size_t dim, std::size_t g) {
    if (g == 0) throw InvalidSpec("midpoint rule needs at least one cell");
    QuadratureNodes q;
    q.dim = dim;
    std::size_t total = 1;
    for (std::size_t k = 0; k < dim; ++k) total *= g;
    q.points.resize(total * dim);
    q.weights.assign(total, 1.0 / static_cast<double>(total));
    for (std::size_t r = 0; r < total; ++r) {
        std::size_t f = r;
        for (std::size_t k = dim; k-- > 0;) {
            q.points[r * dim + k] = (static_cast<double>(f % g) + 0.5) / static_cast<double>(g);
            f /= g;
        }
    }
    return q;
}

QuadratureNodes sobol_nodes(std::size_t dim, std::size_t n, std::uint64_t seed) {
    if (n == 0) throw InvalidSpec("Sobol rule needs at least one point");
    QuadratureNodes q;
    q.dim = dim;
    q.weights.assign(n, 1.0 / static_cast<double>(n));
    if (dim == 0) return q;
    q.points.resize(n * dim);
    boost::random::sobol_engine<std::uint32_t, 32> gen(dim);
    Rng rng = make_stream(seed, 0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<double> shift(dim);
    for (auto& s : shift) s = unif(rng);
    constexpr double scale = 1.0 / 4294967296.0;
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t k = 0; k < dim; ++k) {
            double v = static_cast<double>(gen()) * scale + shift[k];
            q.points[r * dim + k] = v - std::floor(v);
        }
    }
    return q;
}

}  // namespace condcop
