#pragma once
// Brute-force reference implementations used only by the tests.

#include "condcop/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

namespace oracle {

inline condcop::Dataset random_dataset(std::mt19937_64& rng, std::size_t n, std::size_t cols,
                                       bool with_ties = false) {
    std::normal_distribution<double> nd;
    std::vector<std::vector<double>> c(cols, std::vector<double>(n));
    std::vector<std::string> names;
    for (std::size_t k = 0; k < cols; ++k) {
        names.push_back("c" + std::to_string(k));
        for (std::size_t i = 0; i < n; ++i) {
            double v = nd(rng);
            if (k > 0) v += 0.6 * c[0][i];
            c[k][i] = with_ties ? std::round(v * 2.0) / 2.0 : v;
        }
    }
    return condcop::Dataset(names, c);
}

/// Sub-sample rows of x-columns for the rows with mask set.
inline std::vector<std::vector<double>> subsample(const condcop::Dataset& d,
                                                  const std::vector<std::size_t>& x_cols,
                                                  const std::vector<std::uint8_t>& mask) {
    std::vector<std::vector<double>> out;
    for (std::size_t i = 0; i < d.rows(); ++i) {
        if (!mask[i]) continue;
        std::vector<double> r;
        for (auto k : x_cols) r.push_back(d.at(i, k));
        out.push_back(r);
    }
    return out;
}

/// F_{n,k}(x_ik | A) by direct counting.
inline std::vector<std::vector<double>> cond_ranks(const std::vector<std::vector<double>>& x) {
    const std::size_t m = x.size(), p = m ? x[0].size() : 0;
    std::vector<std::vector<double>> u(m, std::vector<double>(p));
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t k = 0; k < p; ++k) {
            std::size_t c = 0;
            for (std::size_t j = 0; j < m; ++j) c += x[j][k] <= x[i][k];
            u[i][k] = static_cast<double>(c) / static_cast<double>(m);
        }
    return u;
}

inline double hat(const std::vector<std::vector<double>>& x, const std::vector<double>& u) {
    const auto r = cond_ranks(x);
    std::size_t c = 0;
    for (const auto& ri : r) {
        bool in = true;
        for (std::size_t k = 0; k < u.size(); ++k) in = in && ri[k] <= u[k];
        c += in;
    }
    return static_cast<double>(c) / static_cast<double>(x.size());
}

/// inf{t : F_n(t) >= u} over the sample values of column k.
inline double inverse(const std::vector<std::vector<double>>& x, std::size_t k, double u) {
    const double m = static_cast<double>(x.size());
    double best = std::numeric_limits<double>::infinity();
    if (u <= 0.0) return -std::numeric_limits<double>::infinity();
    for (const auto& xi : x) {
        std::size_t c = 0;
        for (const auto& xj : x) c += xj[k] <= xi[k];
        if (static_cast<double>(c) / m >= u) best = std::min(best, xi[k]);
    }
    return best;
}

inline double bar(const std::vector<std::vector<double>>& x, const std::vector<double>& u) {
    std::vector<double> t(u.size());
    for (std::size_t k = 0; k < u.size(); ++k) t[k] = inverse(x, k, u[k]);
    std::size_t c = 0;
    for (const auto& xi : x) {
        bool in = true;
        for (std::size_t k = 0; k < u.size(); ++k) in = in && xi[k] <= t[k];
        c += in;
    }
    return static_cast<double>(c) / static_cast<double>(x.size());
}

/// Fraction of ordered pairs (i, j) with U_j <= U_i on the given dimensions.
inline double brute_pairs(const std::vector<std::vector<double>>& U, const std::vector<std::size_t>& dims) {
    double c = 0;
    for (const auto& ui : U)
        for (const auto& uj : U) {
            bool in = true;
            for (auto k : dims) in = in && uj[k] <= ui[k];
            c += in;
        }
    return c / (static_cast<double>(U.size()) * static_cast<double>(U.size()));
}

/// Mean of prod_k (1 - U_k).
inline double brute_spearman(const std::vector<std::vector<double>>& U) {
    double s = 0;
    for (const auto& u : U) {
        double prod = 1;
        for (double v : u) prod *= 1 - v;
        s += prod;
    }
    return s / static_cast<double>(U.size());
}

}  // namespace oracle
