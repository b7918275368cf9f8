#include "condcop/normal.hpp"

#include "condcop/errors.hpp"

#include <boost/math/distributions/normal.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <numbers>

namespace condcop {

double normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double normal_quantile(double p) {
    if (p <= 0.0) return -INFINITY;
    if (p >= 1.0) return INFINITY;
    return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

double bivariate_normal_cdf(double h, double k, double r) {
    if (!(r > -1.0 && r < 1.0)) throw InvalidSpec("bivariate normal correlation must lie in (-1, 1)");
    if (std::isinf(h) && h < 0) return 0.0;
    if (std::isinf(k) && k < 0) return 0.0;
    if (std::isinf(h)) return normal_cdf(k);
    if (std::isinf(k)) return normal_cdf(h);
    const double base = normal_cdf(h) * normal_cdf(k);
    if (r == 0.0) return base;
    // Phi2 = Phi(h) Phi(k) + (1/2pi) int_0^{asin r} exp(-(h^2 + k^2 - 2hk sin t) / (2 cos^2 t)) dt
    auto f = [h, k](double t) {
        const double s = std::sin(t), c2 = 1.0 - s * s;
        return std::exp(-(h * h + k * k - 2.0 * h * k * s) / (2.0 * c2));
    };
    const double I = boost::math::quadrature::gauss_kronrod<double, 15>::integrate(f, 0.0, std::asin(r), 15, 1e-12);
    return base + I / (2.0 * std::numbers::pi);
}

}  // namespace condcop
