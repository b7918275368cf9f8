#include "condcop/measures.hpp"

#include "condcop/errors.hpp"
#include "condcop/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace condcop {

double PsiFactor::operator()(double u) const noexcept {
    switch (kind) {
        case Kind::Interval: return (u >= lo && u <= hi) ? 1.0 : 0.0;
        case Kind::Identity: return u;
        case Kind::Complement: return 1.0 - u;
    }
    return 0.0;
}

double PsiFactor::upper_integral(double r) const noexcept {
    r = std::clamp(r, 0.0, 1.0);
    switch (kind) {
        case Kind::Interval: return std::max(0.0, hi - std::max(lo, r));
        case Kind::Identity: return 0.5 * (1.0 - r * r);
        case Kind::Complement: return 0.5 * (1.0 - r) * (1.0 - r);
    }
    return 0.0;
}

Psi Psi::constant() { return Psi{}; }

Psi Psi::blomqvist() {
    Psi p;
    p.kind_ = PsiKind::Blomqvist;
    return p;
}

Psi Psi::tail(std::vector<double> u0, std::vector<double> v0) {
    Psi p;
    p.kind_ = PsiKind::Tail;
    p.u0_ = std::move(u0);
    p.v0_ = std::move(v0);
    return p;
}

Psi Psi::gini() {
    Psi p;
    p.kind_ = PsiKind::Gini;
    return p;
}

Psi Psi::reflection(std::vector<std::pair<std::vector<int>, double>> weights) {
    Psi p;
    p.kind_ = PsiKind::Reflection;
    p.refl_ = std::move(weights);
    return p;
}

Psi Psi::tabulated(GridEval table) {
    Psi p;
    p.kind_ = PsiKind::Tabulated;
    p.table_ = std::move(table);
    return p;
}

std::string Psi::name() const {
    switch (kind_) {
        case PsiKind::Constant1: return "constant";
        case PsiKind::Blomqvist: return "blomqvist";
        case PsiKind::Tail: return "tail";
        case PsiKind::Gini: return "gini";
        case PsiKind::Reflection: return "reflection";
        case PsiKind::Tabulated: return "tabulated";
    }
    return "?";
}

bool Psi::continuous() const noexcept {
    return kind_ != PsiKind::Blomqvist && kind_ != PsiKind::Tail;
}

void Psi::validate(std::size_t p) const {
    auto in01 = [](const std::vector<double>& v) {
        return std::all_of(v.begin(), v.end(), [](double x) { return x >= 0.0 && x <= 1.0; });
    };
    switch (kind_) {
        case PsiKind::Constant1:
        case PsiKind::Blomqvist: break;
        case PsiKind::Tail:
            if (u0_.size() != p || v0_.size() != p || !in01(u0_) || !in01(v0_)) {
                throw InvalidSpec("tail weight needs thresholds u0, v0 in [0,1]^" + std::to_string(p));
            }
            break;
        case PsiKind::Gini:
            if (p != 2) throw InvalidSpec("Gini weight requires p = 2, got p = " + std::to_string(p));
            break;
        case PsiKind::Reflection:
            if (refl_.empty()) throw InvalidSpec("reflection weight needs at least one term");
            for (const auto& [eps, w] : refl_) {
                if (eps.size() != p) throw InvalidSpec("reflection vector of wrong length");
                for (int e : eps)
                    if (e != 0 && e != 1) throw InvalidSpec("reflection entries must be 0 or 1");
                if (!std::isfinite(w)) throw InvalidSpec("reflection weight not finite");
            }
            break;
        case PsiKind::Tabulated:
            if (table_.dim() != p || table_.values.size() != table_.size() || table_.size() == 0) {
                throw InvalidSpec("tabulated weight has wrong shape");
            }
            for (const auto& k : table_.knots) {
                if (!std::is_sorted(k.begin(), k.end()) || k.front() < 0.0 || k.back() > 1.0) {
                    throw InvalidSpec("tabulated weight knots must be sorted within [0,1]");
                }
            }
            break;
    }
}

namespace {

double interpolate(const GridEval& t, std::span<const double> u) {
    const std::size_t p = t.dim();
    std::vector<std::size_t> lo(p);
    std::vector<double> frac(p);
    for (std::size_t k = 0; k < p; ++k) {
        const auto& kn = t.knots[k];
        if (kn.size() == 1 || u[k] <= kn.front()) {
            lo[k] = 0;
            frac[k] = 0.0;
        } else if (u[k] >= kn.back()) {
            lo[k] = kn.size() - 2;
            frac[k] = 1.0;
        } else {
            auto it = std::upper_bound(kn.begin(), kn.end(), u[k]);
            lo[k] = static_cast<std::size_t>(it - kn.begin()) - 1;
            frac[k] = (u[k] - kn[lo[k]]) / (kn[lo[k] + 1] - kn[lo[k]]);
        }
    }
    double s = 0.0;
    std::vector<std::size_t> idx(p);
    for (std::size_t mask = 0; mask < (std::size_t{1} << p); ++mask) {
        double w = 1.0;
        for (std::size_t k = 0; k < p; ++k) {
            const bool up = (mask >> k) & 1U;
            if (t.knots[k].size() == 1) {
                if (up) { w = 0.0; break; }
                idx[k] = 0;
                continue;
            }
            idx[k] = lo[k] + (up ? 1 : 0);
            w *= up ? frac[k] : 1.0 - frac[k];
        }
        if (w != 0.0) s += w * t.values[t.flat_index(idx)];
    }
    return s;
}

}  // namespace

double Psi::operator()(std::span<const double> u) const {
    switch (kind_) {
        case PsiKind::Constant1: return 1.0;
        case PsiKind::Blomqvist:
            return std::all_of(u.begin(), u.end(), [](double x) { return x <= 0.5; }) ? 1.0 : 0.0;
        case PsiKind::Tail: {
            bool low = true, high = true;
            for (std::size_t k = 0; k < u.size(); ++k) {
                low = low && u[k] <= u0_[k];
                high = high && u[k] >= v0_[k];
            }
            return (low ? 1.0 : 0.0) + (high ? 1.0 : 0.0);
        }
        case PsiKind::Gini: return 2.0 * (std::abs(u[0] + u[1] - 1.0) - std::abs(u[0] - u[1]));
        case PsiKind::Reflection: {
            double s = 0.0;
            for (const auto& [eps, w] : refl_) {
                double prod = w;
                for (std::size_t k = 0; k < u.size(); ++k) prod *= eps[k] ? u[k] : 1.0 - u[k];
                s += prod;
            }
            return s;
        }
        case PsiKind::Tabulated: return interpolate(table_, u);
    }
    return 0.0;
}

std::optional<std::vector<PsiTerm>> Psi::separable(std::size_t p) const {
    using K = PsiFactor::Kind;
    switch (kind_) {
        case PsiKind::Constant1: return std::vector<PsiTerm>{{1.0, std::vector<PsiFactor>(p)}};
        case PsiKind::Blomqvist:
            return std::vector<PsiTerm>{{1.0, std::vector<PsiFactor>(p, PsiFactor{K::Interval, 0.0, 0.5})}};
        case PsiKind::Tail: {
            PsiTerm lo{1.0, {}}, hi{1.0, {}};
            for (std::size_t k = 0; k < p; ++k) {
                lo.factors.push_back({K::Interval, 0.0, u0_[k]});
                hi.factors.push_back({K::Interval, v0_[k], 1.0});
            }
            return std::vector<PsiTerm>{lo, hi};
        }
        case PsiKind::Reflection: {
            std::vector<PsiTerm> terms;
            for (const auto& [eps, w] : refl_) {
                PsiTerm t{w, {}};
                for (std::size_t k = 0; k < p; ++k) t.factors.push_back({eps[k] ? K::Identity : K::Complement, 0, 1});
                terms.push_back(t);
            }
            return terms;
        }
        case PsiKind::Gini:
        case PsiKind::Tabulated: return std::nullopt;
    }
    return std::nullopt;
}

void MeasureSpec::validate(std::size_t p) const {
    auto check = [p](const std::vector<std::size_t>& s, const char* what) {
        for (std::size_t i = 0; i < s.size(); ++i) {
            if (s[i] >= p) throw InvalidSpec(std::string(what) + " index out of range for p = " + std::to_string(p));
            if (i > 0 && s[i] <= s[i - 1]) throw InvalidSpec(std::string(what) + " must be sorted without repeats");
        }
    };
    check(K, "K");
    check(K_prime, "K'");
    psi.validate(p);
    if (!std::isfinite(scale) || !std::isfinite(shift)) throw InvalidSpec("non-finite report transform");
}

namespace {

std::vector<std::size_t> iota_vec(std::size_t p) {
    std::vector<std::size_t> v(p);
    std::iota(v.begin(), v.end(), 0);
    return v;
}

}  // namespace

MeasureSpec MeasureSpec::kendall(std::size_t p) {
    MeasureSpec s;
    s.K = s.K_prime = iota_vec(p);
    s.label = "kendall";
    if (p >= 2) {
        const double d = std::ldexp(1.0, static_cast<int>(p) - 1) - 1.0;
        s.scale = std::ldexp(1.0, static_cast<int>(p)) / d;
        s.shift = -1.0 / d;
    }
    return s;
}

MeasureSpec MeasureSpec::kendall_pair(std::size_t k, std::size_t l) {
    MeasureSpec s;
    s.K = s.K_prime = {std::min(k, l), std::max(k, l)};
    if (k == l) throw InvalidSpec("Kendall pair needs two distinct columns");
    s.scale = 4.0;
    s.shift = -1.0;
    s.label = "kendall";
    return s;
}

MeasureSpec MeasureSpec::spearman(std::size_t p) {
    MeasureSpec s;
    s.K = iota_vec(p);
    s.label = "spearman";
    if (p >= 2) {
        const double two_p = std::ldexp(1.0, static_cast<int>(p));
        const double c = static_cast<double>(p + 1) / (two_p - static_cast<double>(p + 1));
        s.scale = c * two_p;
        s.shift = -c;
    }
    return s;
}

MeasureSpec MeasureSpec::blomqvist(std::size_t p) {
    MeasureSpec s;
    s.psi = Psi::blomqvist();
    s.K_prime = iota_vec(p);
    s.label = "blomqvist";
    if (p == 2) {
        s.scale = 4.0;
        s.shift = -1.0;
    }
    return s;
}

MeasureSpec MeasureSpec::gini() {
    MeasureSpec s;
    s.psi = Psi::gini();
    s.K_prime = {0, 1};
    s.label = "gini";
    return s;
}

std::string to_string(ResultMethod m) {
    switch (m) {
        case ResultMethod::ClosedForm: return "closed_form";
        case ResultMethod::GridIntegration: return "grid_integration";
        case ResultMethod::MCIntegration: return "mc_integration";
    }
    return "?";
}

void PointFunctional::add(std::span<const double> x, double c) {
    if (c == 0.0) return;
    points.insert(points.end(), x.begin(), x.end());
    coefs.push_back(c);
}

namespace {

/// Coordinate roles relative to (K, K').
struct Roles {
    std::vector<std::size_t> Kc;      // K and K'
    std::vector<std::size_t> Kh;      // K only
    std::vector<std::size_t> Konly;   // K' only
    std::vector<std::size_t> F0;      // neither
    std::vector<std::size_t> F;       // not in K'
    std::vector<char> in_K, in_Kp;

    Roles(const MeasureSpec& s, std::size_t p) : in_K(p, 0), in_Kp(p, 0) {
        for (auto k : s.K) in_K[k] = 1;
        for (auto k : s.K_prime) in_Kp[k] = 1;
        for (std::size_t k = 0; k < p; ++k) {
            if (in_K[k] && in_Kp[k]) Kc.push_back(k);
            else if (in_K[k]) Kh.push_back(k);
            else if (in_Kp[k]) Konly.push_back(k);
            else F0.push_back(k);
            if (!in_Kp[k]) F.push_back(k);
        }
    }
};

/// Rank points of the sub-sample restricted to a coordinate subset.
IntPoints restrict_ranks(const CondEmpCopula& cop, const std::vector<std::size_t>& dims) {
    IntPoints pts(dims.size());
    std::vector<int> c(dims.size());
    for (std::size_t s = 0; s < cop.n_A(); ++s) {
        for (std::size_t a = 0; a < dims.size(); ++a) c[a] = cop.rank_max(s, dims[a]);
        if (dims.empty()) pts.push_empty();
        else pts.push_back(c);
    }
    return pts;
}

double closed_form(const CondEmpCopula& cop, const MeasureSpec& spec, const std::vector<PsiTerm>& terms) {
    const std::size_t p = cop.dim(), m = cop.n_A();
    const double md = static_cast<double>(m);
    const Roles r(spec, p);
    const auto U = cop.pseudo_observations();
    const IntPoints kc_pts = restrict_ranks(cop, r.Kc);
    double total = 0.0;
    for (const auto& t : terms) {
        double base = t.coef;
        for (auto k : r.F0) base *= t.factors[k].upper_integral(0.0);
        if (base == 0.0) continue;
        if (spec.K_prime.empty()) {
            if (spec.K.empty()) {
                total += base;
                continue;
            }
            double s = 0.0;
            for (std::size_t j = 0; j < m; ++j) {
                double prod = 1.0;
                for (auto k : spec.K) prod *= t.factors[k].upper_integral(U[j * p + k]);
                s += prod;
            }
            total += base * s / md;
            continue;
        }
        std::vector<double> Q(m, 1.0);
        if (!spec.K.empty()) {
            std::vector<double> w(m);
            for (std::size_t j = 0; j < m; ++j) {
                double prod = 1.0;
                for (auto k : r.Kh) prod *= t.factors[k].upper_integral(U[j * p + k]);
                w[j] = prod;
            }
            Q = dominated_weight(kc_pts, w, kc_pts);
            for (double& q : Q) q /= md;
        }
        double s = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            double prod = Q[i];
            for (auto k : spec.K_prime) prod *= t.factors[k](U[i * p + k]);
            s += prod;
        }
        total += base * s / md;
    }
    return total;
}

QuadratureNodes make_nodes(std::size_t dim, const QuadratureConfig& cfg, ResultMethod& method) {
    const bool qmc = cfg.method == IntegrationMethod::QMC ||
                     (cfg.method != IntegrationMethod::Grid && dim > cfg.max_grid_dim);
    if (dim == 0) {
        method = ResultMethod::ClosedForm;
        return midpoint_nodes(0, 1);
    }
    if (qmc) {
        method = ResultMethod::MCIntegration;
        return sobol_nodes(dim, cfg.qmc_points, cfg.seed);
    }
    method = ResultMethod::GridIntegration;
    return midpoint_nodes(dim, cfg.grid_knots);
}

double quadrature(const CondEmpCopula& cop, const MeasureSpec& spec, const QuadratureNodes& nodes) {
    const std::size_t p = cop.dim(), m = cop.n_A();
    const Roles r(spec, p);
    const auto U = cop.pseudo_observations();
    const std::size_t R = nodes.size();
    std::vector<double> u(p);

    if (spec.K_prime.empty()) {
        std::vector<double> q(R * p, 1.0), psi(R);
        for (std::size_t i = 0; i < R; ++i) {
            const double* x = nodes.point(i);
            for (std::size_t a = 0; a < r.F.size(); ++a) u[r.F[a]] = x[a];
            psi[i] = nodes.weights[i] * spec.psi(u);
            for (auto k : spec.K) q[i * p + k] = u[k];
        }
        const auto C = spec.K.empty() ? std::vector<double>(R, 1.0) : cop.eval_hat_many(q);
        double s = 0.0;
        for (std::size_t i = 0; i < R; ++i) s += psi[i] * C[i];
        return s;
    }

    double total = 0.0;
    if (r.Kh.empty()) {
        std::vector<double> Ci(m, 1.0);
        if (!spec.K.empty()) {
            const IntPoints kc = restrict_ranks(cop, r.Kc);
            Ci = dominated_count(kc, kc);
            for (double& c : Ci) c /= static_cast<double>(m);
        }
        for (std::size_t i = 0; i < m; ++i) {
            for (auto k : spec.K_prime) u[k] = U[i * p + k];
            double s = 0.0;
            for (std::size_t j = 0; j < R; ++j) {
                const double* x = nodes.point(j);
                for (std::size_t a = 0; a < r.F.size(); ++a) u[r.F[a]] = x[a];
                s += nodes.weights[j] * spec.psi(u);
            }
            total += Ci[i] * s;
        }
        return total / static_cast<double>(m);
    }

    // Copula values depend on both the observation and the node: evaluate in chunks.
    const std::size_t chunk = std::max<std::size_t>(1, (std::size_t{1} << 20) / R);
    std::vector<double> q, psi;
    for (std::size_t i0 = 0; i0 < m; i0 += chunk) {
        const std::size_t i1 = std::min(m, i0 + chunk);
        q.assign((i1 - i0) * R * p, 1.0);
        psi.resize((i1 - i0) * R);
        for (std::size_t i = i0; i < i1; ++i) {
            for (auto k : spec.K_prime) u[k] = U[i * p + k];
            for (std::size_t j = 0; j < R; ++j) {
                const double* x = nodes.point(j);
                for (std::size_t a = 0; a < r.F.size(); ++a) u[r.F[a]] = x[a];
                const std::size_t row = (i - i0) * R + j;
                psi[row] = nodes.weights[j] * spec.psi(u);
                for (auto k : spec.K) q[row * p + k] = u[k];
            }
        }
        const auto C = cop.eval_hat_many(q);
        for (std::size_t row = 0; row < psi.size(); ++row) total += psi[row] * C[row];
    }
    return total / static_cast<double>(m);
}

}  // namespace

MeasureResult estimate_rho(const CondEmpCopula& cop, const MeasureSpec& spec, const QuadratureConfig& cfg) {
    spec.validate(cop.dim());
    MeasureResult res;
    res.event = cop.event().name;
    res.n = cop.n();
    res.n_A = cop.n_A();
    res.p_hat = cop.p_hat();
    res.spec = spec;
    res.clt_unsupported = !spec.psi.continuous();
    const auto terms = spec.psi.separable(cop.dim());
    const bool closed = cfg.method == IntegrationMethod::ClosedForm ||
                        (cfg.method == IntegrationMethod::Auto && terms.has_value());
    if (closed) {
        if (!terms) throw InvalidSpec("no closed form for weight '" + spec.psi.name() + "'");
        res.raw = closed_form(cop, spec, *terms);
        res.method = ResultMethod::ClosedForm;
    } else {
        const Roles r(spec, cop.dim());
        const auto nodes = make_nodes(r.F.size(), cfg, res.method);
        if (res.method == ResultMethod::GridIntegration) res.grid_resolution = cfg.grid_knots;
        if (res.method == ResultMethod::MCIntegration) res.mc_draws = cfg.qmc_points;
        res.raw = quadrature(cop, spec, nodes);
    }
    res.estimate = spec.report(res.raw);
    return res;
}

MeasureResult estimate_spearman_tail(const Dataset& data, std::span<const std::size_t> x_cols,
                                     std::span<const double> a) {
    if (a.size() != x_cols.size()) throw InvalidSpec("one threshold per x-column is required");
    BoxSpec box{"spearman_tail", {}};
    for (std::size_t k = 0; k < x_cols.size(); ++k) {
        if (std::isinf(a[k]) && a[k] > 0) continue;
        box.bounds.push_back({ColumnRef::by_index(x_cols[k]), Bound::none(), Bound::at_value(a[k])});
    }
    const auto ev = resolve_event(box, data);
    const auto cop = CondEmpCopula::fit(data, x_cols, ev);
    MeasureSpec spec;
    spec.K = iota_vec(x_cols.size());
    spec.label = "spearman_tail";
    QuadratureConfig cfg;
    cfg.method = IntegrationMethod::ClosedForm;
    return estimate_rho(cop, spec, cfg);
}

std::vector<MeasureResult> estimate_rho_family(const Dataset& data, std::span<const std::size_t> x_cols,
                                               std::span<const MeasureSpec> specs,
                                               std::span<const ResolvedEvent> events,
                                               const QuadratureConfig& cfg) {
    if (specs.size() != 1 && specs.size() != events.size()) {
        throw InvalidSpec("need one measure per event or a single shared measure");
    }
    std::vector<MeasureResult> out;
    out.reserve(events.size());
    for (std::size_t j = 0; j < events.size(); ++j) {
        if (events[j].n_A == 0) throw EmptyEvent(events[j].name, "event " + std::to_string(j) + " of the family");
        const auto cop = CondEmpCopula::fit(data, x_cols, events[j]);
        out.push_back(estimate_rho(cop, specs.size() == 1 ? specs[0] : specs[j], cfg));
    }
    return out;
}

double kendall_tau_cond(const CondEmpCopula& cop, std::size_t k, std::size_t l) {
    QuadratureConfig cfg;
    cfg.method = IntegrationMethod::ClosedForm;
    return estimate_rho(cop, MeasureSpec::kendall_pair(k, l), cfg).estimate;
}

namespace {

bool interval_only(const std::vector<PsiTerm>& terms) {
    for (const auto& t : terms)
        for (const auto& f : t.factors)
            if (f.kind != PsiFactor::Kind::Interval) return false;
    return true;
}

/// Adds coef * (h-measure of the closed box [l, r] on dims) expanded at the corners.
void add_box(PointFunctional& out, std::size_t p, const std::vector<std::size_t>& dims,
             const std::vector<double>& l, const std::vector<double>& r, double coef) {
    if (coef == 0.0) return;
    const std::size_t d = dims.size();
    std::vector<double> y(p, 1.0);
    for (std::size_t mask = 0; mask < (std::size_t{1} << d); ++mask) {
        bool zero = false, ones = true;
        int sign = 1;
        for (std::size_t a = 0; a < d; ++a) {
            const bool lower = (mask >> a) & 1U;
            y[dims[a]] = lower ? l[a] : r[a];
            if (lower) sign = -sign;
            zero = zero || y[dims[a]] <= 0.0;
            ones = ones && y[dims[a]] >= 1.0;
        }
        if (zero || ones) continue;
        out.add(y, sign * coef);
    }
}

}  // namespace

PointFunctional linearize_measure(const CondEmpCopula& cop, const MeasureSpec& spec, const QuadratureConfig& cfg) {
    spec.validate(cop.dim());
    const std::size_t p = cop.dim(), m = cop.n_A();
    const double md = static_cast<double>(m);
    const Roles r(spec, p);
    const auto U = cop.pseudo_observations();
    const auto terms = spec.psi.separable(p);
    PointFunctional out;
    out.dim = p;
    std::vector<double> x(p), u(p);
    ResultMethod unused{};

    // First term: h_K integrated against the hat copula measure of the K' margin.
    if (!spec.K.empty()) {
        if (spec.K_prime.empty()) {
            if (terms) {
                const auto nodes = make_nodes(spec.K.size(), cfg, unused);
                for (std::size_t j = 0; j < nodes.size(); ++j) {
                    std::fill(x.begin(), x.end(), 1.0);
                    for (std::size_t a = 0; a < spec.K.size(); ++a) x[spec.K[a]] = nodes.point(j)[a];
                    double w = 0.0;
                    for (const auto& t : *terms) {
                        double prod = t.coef;
                        for (std::size_t k = 0; k < p; ++k)
                            prod *= r.in_K[k] ? t.factors[k](x[k]) : t.factors[k].upper_integral(0.0);
                        w += prod;
                    }
                    out.add(x, nodes.weights[j] * w);
                }
            } else {
                const auto nodes = make_nodes(p, cfg, unused);
                for (std::size_t j = 0; j < nodes.size(); ++j) {
                    std::fill(x.begin(), x.end(), 1.0);
                    for (std::size_t k = 0; k < p; ++k) u[k] = nodes.point(j)[k];
                    for (auto k : spec.K) x[k] = u[k];
                    out.add(x, nodes.weights[j] * spec.psi(u));
                }
            }
        } else {
            const std::vector<std::size_t>& qdims = terms ? r.Kh : r.F;
            const auto nodes = make_nodes(qdims.size(), cfg, unused);
            for (std::size_t i = 0; i < m; ++i) {
                for (std::size_t j = 0; j < nodes.size(); ++j) {
                    std::fill(x.begin(), x.end(), 1.0);
                    for (auto k : r.Kc) x[k] = U[i * p + k];
                    for (auto k : spec.K_prime) u[k] = U[i * p + k];
                    for (std::size_t a = 0; a < qdims.size(); ++a) u[qdims[a]] = nodes.point(j)[a];
                    for (auto k : r.Kh) x[k] = u[k];
                    double w = 0.0;
                    if (terms) {
                        for (const auto& t : *terms) {
                            double prod = t.coef;
                            for (std::size_t k = 0; k < p; ++k) {
                                if (r.in_Kp[k] || r.in_K[k]) prod *= t.factors[k](u[k]);
                                else prod *= t.factors[k].upper_integral(0.0);
                            }
                            w += prod;
                        }
                    } else {
                        w = spec.psi(u);
                    }
                    out.add(x, nodes.weights[j] * w / md);
                }
            }
        }
    }
    if (spec.K_prime.empty()) return out;

    // Second term: the weight chi integrated against dh on the K' margin.
    if (terms && interval_only(*terms)) {
        const std::size_t d = spec.K_prime.size();
        std::vector<double> l(d), rr(d);
        for (const auto& t : *terms) {
            double base = t.coef;
            for (auto k : r.F0) base *= t.factors[k].upper_integral(0.0);
            if (base == 0.0) continue;
            auto fixed_box = [&]() {
                for (std::size_t a = 0; a < d; ++a) {
                    l[a] = t.factors[spec.K_prime[a]].lo;
                    rr[a] = t.factors[spec.K_prime[a]].hi;
                }
            };
            if (spec.K.empty() || r.Kc.empty()) {
                double scalar = 1.0;
                if (!spec.K.empty()) {
                    double s = 0.0;
                    for (std::size_t j = 0; j < m; ++j) {
                        double prod = 1.0;
                        for (auto k : r.Kh) prod *= t.factors[k].upper_integral(U[j * p + k]);
                        s += prod;
                    }
                    scalar = s / md;
                }
                fixed_box();
                add_box(out, p, spec.K_prime, l, rr, base * scalar);
                continue;
            }
            for (std::size_t j = 0; j < m; ++j) {
                double w = base / md;
                for (auto k : r.Kh) w *= t.factors[k].upper_integral(U[j * p + k]);
                if (w == 0.0) continue;
                fixed_box();
                bool empty = false;
                for (std::size_t a = 0; a < d; ++a) {
                    const std::size_t k = spec.K_prime[a];
                    if (r.in_K[k]) l[a] = std::max(l[a], U[j * p + k]);
                    empty = empty || l[a] > rr[a];
                }
                if (!empty) add_box(out, p, spec.K_prime, l, rr, w);
            }
        }
        return out;
    }

    // Mesh version: chi at cell midpoints times the h-increment over each cell.
    const std::size_t d = spec.K_prime.size();
    const std::size_t G = cfg.grid_knots;
    const auto mids = midpoint_nodes(d, G);
    std::vector<double> chi(mids.size(), 0.0);
    if (terms) {
        IntPoints kc_pts = restrict_ranks(cop, r.Kc);
        for (const auto& t : *terms) {
            double base = t.coef;
            for (auto k : r.F0) base *= t.factors[k].upper_integral(0.0);
            if (base == 0.0) continue;
            std::vector<double> cval(mids.size(), 1.0);
            if (!spec.K.empty()) {
                std::vector<double> w(m);
                for (std::size_t j = 0; j < m; ++j) {
                    double prod = 1.0;
                    for (auto k : r.Kh) prod *= t.factors[k].upper_integral(U[j * p + k]);
                    w[j] = prod / md;
                }
                IntPoints q(r.Kc.size());
                std::vector<int> c(r.Kc.size());
                for (std::size_t c0 = 0; c0 < mids.size(); ++c0) {
                    for (std::size_t a = 0, b = 0; a < d; ++a) {
                        if (r.in_K[spec.K_prime[a]]) c[b++] = cop.hat_threshold(mids.point(c0)[a]);
                    }
                    if (r.Kc.empty()) q.push_empty();
                    else q.push_back(c);
                }
                cval = dominated_weight(kc_pts, w, q);
            }
            for (std::size_t c0 = 0; c0 < mids.size(); ++c0) {
                double prod = base * cval[c0];
                for (std::size_t a = 0; a < d; ++a) prod *= t.factors[spec.K_prime[a]](mids.point(c0)[a]);
                chi[c0] += prod;
            }
        }
    } else {
        const auto fnodes = make_nodes(r.F.size(), cfg, unused);
        std::vector<double> q;
        for (std::size_t c0 = 0; c0 < mids.size(); ++c0) {
            for (std::size_t a = 0; a < d; ++a) u[spec.K_prime[a]] = mids.point(c0)[a];
            if (spec.K.empty() || r.Kh.empty()) {
                double cv = 1.0;
                if (!spec.K.empty()) {
                    std::fill(x.begin(), x.end(), 1.0);
                    for (auto k : r.Kc) x[k] = u[k];
                    cv = cop.eval_hat(x);
                }
                double s = 0.0;
                for (std::size_t j = 0; j < fnodes.size(); ++j) {
                    for (std::size_t a = 0; a < r.F.size(); ++a) u[r.F[a]] = fnodes.point(j)[a];
                    s += fnodes.weights[j] * spec.psi(u);
                }
                chi[c0] = cv * s;
            } else {
                q.assign(fnodes.size() * p, 1.0);
                std::vector<double> psiv(fnodes.size());
                for (std::size_t j = 0; j < fnodes.size(); ++j) {
                    for (std::size_t a = 0; a < r.F.size(); ++a) u[r.F[a]] = fnodes.point(j)[a];
                    psiv[j] = fnodes.weights[j] * spec.psi(u);
                    for (auto k : spec.K) q[j * p + k] = u[k];
                }
                const auto C = cop.eval_hat_many(q);
                double s = 0.0;
                for (std::size_t j = 0; j < fnodes.size(); ++j) s += psiv[j] * C[j];
                chi[c0] = s;
            }
        }
    }
    // Summation by parts: collect the corner coefficients of every cell.
    std::map<std::vector<std::size_t>, double> corner;
    std::vector<std::size_t> idx(d), cidx(d);
    for (std::size_t c0 = 0; c0 < mids.size(); ++c0) {
        if (chi[c0] == 0.0) continue;
        std::size_t f = c0;
        for (std::size_t a = d; a-- > 0;) {
            idx[a] = f % G;
            f /= G;
        }
        for (std::size_t mask = 0; mask < (std::size_t{1} << d); ++mask) {
            int sign = 1;
            for (std::size_t a = 0; a < d; ++a) {
                const bool lower = (mask >> a) & 1U;
                cidx[a] = idx[a] + (lower ? 0 : 1);
                if (lower) sign = -sign;
            }
            corner[cidx] += sign * chi[c0];
        }
    }
    for (const auto& [ci, c] : corner) {
        std::fill(x.begin(), x.end(), 1.0);
        bool zero = false, ones = true;
        for (std::size_t a = 0; a < d; ++a) {
            x[spec.K_prime[a]] = static_cast<double>(ci[a]) / static_cast<double>(G);
            zero = zero || ci[a] == 0;
            ones = ones && ci[a] == G;
        }
        if (zero || ones) continue;
        out.add(x, c);
    }
    return out;
}

}  // namespace condcop
