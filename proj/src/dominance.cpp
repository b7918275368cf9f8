#include "condcop/dominance.hpp"

#include "condcop/errors.hpp"

#include <algorithm>
#include <numeric>

namespace condcop {

void IntPoints::push_back(std::span<const int> p) {
    if (p.size() != dim) throw InvalidSpec("IntPoints: dimension mismatch");
    if (dim == 0) {
        ++count_;
        return;
    }
    coords.insert(coords.end(), p.begin(), p.end());
}

namespace {

class Fenwick {
public:
    explicit Fenwick(std::size_t n) : tree_(n + 1, 0.0) {}
    void add(std::size_t i, double w) {
        for (++i; i < tree_.size(); i += i & (~i + 1)) tree_[i] += w;
    }
    // Sum over positions [0, i).
    double prefix(std::size_t i) const {
        double s = 0.0;
        for (; i > 0; i -= i & (~i + 1)) s += tree_[i];
        return s;
    }

private:
    std::vector<double> tree_;
};

std::vector<double> dominated_1d(const IntPoints& pts, std::span<const double> w,
                                 const IntPoints& qs) {
    std::vector<std::size_t> order(pts.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return pts.coords[a] < pts.coords[b]; });
    std::vector<int> keys(order.size());
    std::vector<double> cum(order.size() + 1, 0.0);
    for (std::size_t r = 0; r < order.size(); ++r) {
        keys[r] = pts.coords[order[r]];
        cum[r + 1] = cum[r] + w[order[r]];
    }
    std::vector<double> out(qs.size());
    for (std::size_t q = 0; q < qs.size(); ++q) {
        auto it = std::upper_bound(keys.begin(), keys.end(), qs.coords[q]);
        out[q] = cum[static_cast<std::size_t>(it - keys.begin())];
    }
    return out;
}

std::vector<double> dominated_2d(const IntPoints& pts, std::span<const double> w,
                                 const IntPoints& qs) {
    const std::size_t np = pts.size();
    const std::size_t nq = qs.size();
    std::vector<int> ys(np);
    for (std::size_t i = 0; i < np; ++i) ys[i] = pts.coords[2 * i + 1];
    std::sort(ys.begin(), ys.end());
    ys.erase(std::unique(ys.begin(), ys.end()), ys.end());

    std::vector<std::size_t> po(np), qo(nq);
    std::iota(po.begin(), po.end(), 0);
    std::iota(qo.begin(), qo.end(), 0);
    std::sort(po.begin(), po.end(), [&](std::size_t a, std::size_t b) {
        return pts.coords[2 * a] < pts.coords[2 * b];
    });
    std::sort(qo.begin(), qo.end(), [&](std::size_t a, std::size_t b) {
        return qs.coords[2 * a] < qs.coords[2 * b];
    });

    Fenwick bit(ys.size());
    std::vector<double> out(nq, 0.0);
    std::size_t next = 0;
    for (std::size_t q : qo) {
        const int qx = qs.coords[2 * q];
        while (next < np && pts.coords[2 * po[next]] <= qx) {
            const std::size_t i = po[next++];
            const auto pos = std::lower_bound(ys.begin(), ys.end(), pts.coords[2 * i + 1]) - ys.begin();
            bit.add(static_cast<std::size_t>(pos), w[i]);
        }
        const auto upto = std::upper_bound(ys.begin(), ys.end(), qs.coords[2 * q + 1]) - ys.begin();
        out[q] = bit.prefix(static_cast<std::size_t>(upto));
    }
    return out;
}

std::vector<double> dominated_direct(const IntPoints& pts, std::span<const double> w,
                                     const IntPoints& qs) {
    const std::size_t d = pts.dim;
    std::vector<double> out(qs.size(), 0.0);
    for (std::size_t q = 0; q < qs.size(); ++q) {
        const int* qc = qs.coords.data() + q * d;
        double s = 0.0;
        for (std::size_t i = 0; i < pts.size(); ++i) {
            const int* pc = pts.coords.data() + i * d;
            bool in = true;
            for (std::size_t k = 0; k < d && in; ++k) in = pc[k] <= qc[k];
            if (in) s += w[i];
        }
        out[q] = s;
    }
    return out;
}

}  // namespace

std::vector<double> dominated_weight(const IntPoints& points, std::span<const double> weights,
                                     const IntPoints& queries) {
    if (points.dim != queries.dim) throw InvalidSpec("dominated_weight: dimension mismatch");
    if (weights.size() != points.size()) throw InvalidSpec("dominated_weight: weight count mismatch");
    switch (points.dim) {
        case 0: {
            double total = 0.0;
            for (double w : weights) total += w;
            return std::vector<double>(queries.size(), total);
        }
        case 1: return dominated_1d(points, weights, queries);
        case 2: return dominated_2d(points, weights, queries);
        default: return dominated_direct(points, weights, queries);
    }
}

std::vector<double> dominated_count(const IntPoints& points, const IntPoints& queries) {
    std::vector<double> ones(points.size(), 1.0);
    return dominated_weight(points, ones, queries);
}

std::vector<double> dominating_weight(const IntPoints& points, const IntPoints& queries,
                                      std::span<const double> query_weights) {
    // p <= q componentwise iff -q <= -p componentwise.
    IntPoints negq(queries.dim), negp(points.dim);
    negq.coords.resize(queries.coords.size());
    negp.coords.resize(points.coords.size());
    std::transform(queries.coords.begin(), queries.coords.end(), negq.coords.begin(),
                   [](int c) { return -c; });
    std::transform(points.coords.begin(), points.coords.end(), negp.coords.begin(),
                   [](int c) { return -c; });
    if (queries.dim == 0) {
        for (std::size_t i = 0; i < queries.size(); ++i) negq.push_empty();
        for (std::size_t i = 0; i < points.size(); ++i) negp.push_empty();
    }
    return dominated_weight(negq, query_weights, negp);
}

}  // namespace condcop
