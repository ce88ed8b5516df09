#include "tractlab/projection.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>

#include <boost/math/tools/toms748_solve.hpp>

namespace tractlab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// Parents whose right end is past e^700 cannot be exponentiated; their children
// are carried symbolically through the final increasing piece.
constexpr double kSymbolicLog = 700.0;

template <class F>
double bracket_root(F&& f, double a, double b, double fa, double fb) {
    std::uintmax_t iters = 200;
    auto tol = [](double x, double y) { return std::abs(y - x) <= 4e-16 * std::max(1.0, std::abs(x)); };
    const auto r = boost::math::tools::toms748_solve(f, a, b, fa, fb, tol, iters);
    return 0.5 * (r.first + r.second);
}

}  // namespace

double Quadruple::size() const { return std::min({A - 5.0, B - A, C - B, D - C}); }

bool Quadruple::valid() const { return A >= 9.0 && A < B && B < C && C < D; }

bool smaller_than(const Quadruple& q, const Quadruple& qt) {
    return qt.A < q.A && q.A < q.B && q.B < qt.B && qt.B < qt.C && qt.C < q.C && q.C < q.D && q.D < qt.D;
}

double quadruple_distance(const Quadruple& q, const Quadruple& qt) {
    return std::max({q.A - qt.A, qt.B - q.B, q.C - qt.C, qt.D - q.D});
}

ProjectionMap ProjectionMap::build(std::shared_ptr<const MapKernel> kernel, double scan_step) {
    ProjectionMap m;
    m.kernel_ = std::move(kernel);
    const MapKernel& k = *m.kernel_;
    m.eps_ = std::max(k.eps_map(), 1e-14);
    m.tol_break_ = m.eps_ / 10;
    m.lambda_min_ = std::log(4.0);
    m.lambda_lin_ = k.tail_start() + std::log(k.scale()) + 1e-6;
    m.kappa_ = k.strip_to_tract(cplx(k.tail_start() + 1.0, 0.0)).real() - 2.0 * (k.tail_start() + 1.0) - 2.0 * std::log(k.scale());

    // Turning points are the zeros of cos(arg(f'(u) du/dlambda)) along the image of the real axis.
    auto dir_sign = [&](double lam) {
        const cplx u = k.w_to_strip({lam, 0.0});
        return std::cos(k.log_strip_derivative(u).imag() + std::arg(k.dstrip_dlambda(lam)));
    };
    double a = m.lambda_min_, fa = dir_sign(a);
    std::vector<int> dirs{fa >= 0 ? +1 : -1};
    for (double b = a + scan_step;; b += scan_step) {
        b = std::min(b, m.lambda_lin_);
        const double fb = dir_sign(b);
        if ((fa < 0) != (fb < 0)) {
            const double tp = bracket_root(dir_sign, a, b, fa, fb);
            m.turns_.push_back(tp);
            dirs.push_back(fb >= 0 ? +1 : -1);
        }
        a = b;
        fa = fb;
        if (b >= m.lambda_lin_) break;
    }
    if (dirs.back() != +1) throw ResolutionError("projection: last piece is not increasing");

    double lo = m.lambda_min_;
    for (std::size_t i = 0; i < m.turns_.size(); ++i) {
        m.pieces_.push_back({lo, m.turns_[i], dirs[i]});
        lo = m.turns_[i];
    }
    m.pieces_.push_back({lo, kInf, +1});

    m.monotone_above_ = m.value_log(m.lambda_min_);
    for (double tv : m.turning_values()) m.monotone_above_ = std::max(m.monotone_above_, tv);
    return m;
}

double ProjectionMap::value_log(double lambda) const {
    if (lambda >= lambda_lin_) return 2.0 * lambda + kappa_;
    const MapKernel& k = *kernel_;
    return k.strip_to_tract(k.w_to_strip({lambda, 0.0})).real();
}

double ProjectionMap::slope_log(double lambda) const {
    if (lambda >= lambda_lin_) return 2.0;
    const MapKernel& k = *kernel_;
    const cplx u = k.w_to_strip({lambda, 0.0});
    return (std::exp(k.log_strip_derivative(u)) * k.dstrip_dlambda(lambda)).real();
}

std::vector<double> ProjectionMap::turning_values() const {
    std::vector<double> v;
    for (double t : turns_) v.push_back(value_log(t));
    return v;
}

double ProjectionMap::iterate_log(double lambda, int n) const {
    if (lambda < lambda_min_ - 1e-12) throw RangeError("phi iterate: t below 4");
    if (n == 0) return std::exp(lambda);
    double x = 0.0;
    for (int i = 0; i < n; ++i) {
        x = value_log(lambda);
        if (x < 4.0 - 10 * eps_) throw RangeError("phi iterate left [4, inf)");
        lambda = std::log(std::max(x, 4.0));
    }
    return x;
}

double ProjectionMap::solve_on_piece(const Piece& p, double x) const {
    double hi = p.hi;
    if (!std::isfinite(hi)) {
        if (x >= value_log(lambda_lin_)) return 0.5 * (x - kappa_);
        hi = lambda_lin_;
    }
    auto f = [&](double l) { return value_log(l) - x; };
    const double fa = f(p.lo), fb = f(hi);
    if (fa == 0.0) return p.lo;
    if (fb == 0.0) return hi;
    return bracket_root(f, p.lo, hi, fa, fb);
}

std::vector<Root> ProjectionMap::preimages(double x, double lo, double hi, double x_err) const {
    lo = std::max(lo, lambda_min_);
    std::vector<Root> out;
    const double guard = 10 * eps_ + x_err;
    for (std::size_t i = 0; i < pieces_.size(); ++i) {
        const Piece& p = pieces_[i];
        if (p.hi < lo || p.lo > hi) continue;
        if (i > 0 && p.lo >= lo && p.lo <= hi && std::abs(value_log(p.lo) - x) <= guard) {
            char buf[160];
            std::snprintf(buf, sizeof buf, "tangency: %.12g within %.1e of the turning value at log t = %.12g", x, guard, p.lo);
            throw TangencyError(buf);
        }
        const double a = std::max(p.lo, lo), b = std::min(p.hi, hi);
        const double va = value_log(a);
        const double vb = std::isfinite(b) ? value_log(b) : kInf;
        if (x < std::min(va, vb) || x > std::max(va, vb)) continue;
        double l;
        if (a == p.lo && (b == p.hi || !std::isfinite(p.hi)))
            l = solve_on_piece(p, x);
        else
            l = solve_on_piece({a, b, p.dir}, x);
        if (!out.empty() && l <= out.back().lambda) continue;  // shared piece endpoint
        const double s = std::abs(slope_log(l));
        out.push_back({l, (eps_ + x_err) / std::max(s, 1e-300)});
    }
    return out;
}

std::vector<std::array<double, 4>> ProjectionMap::sample(double lo, double hi, int n) const {
    std::vector<std::array<double, 4>> rows;
    for (int i = 0; i < n; ++i) {
        const double l = lo + (hi - lo) * i / std::max(1, n - 1);
        rows.push_back({l, std::exp(l), value_log(l), eps_});
    }
    return rows;
}

// ---- minimal covers -------------------------------------------------------

std::size_t IntervalFamily::crooked_count() const {
    return static_cast<std::size_t>(std::count_if(intervals.begin(), intervals.end(), [](const auto& j) { return j.crooked(); }));
}

double IntervalFamily::min_margin() const {
    double m = kInf;
    for (const auto& j : intervals)
        if (j.witness) m = std::min(m, j.witness->margin);
    return m;
}

namespace {

nlohmann::json finite_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

}  // namespace

nlohmann::json IntervalFamily::to_json() const {
    nlohmann::json j;
    j["Q"] = {q.A, q.B, q.C, q.D};
    j["n"] = n;
    j["intervals"] = nlohmann::json::array();
    for (const auto& iv : intervals) {
        nlohmann::json e;
        if (iv.symbolic()) {
            e["symbolic_depth"] = iv.symbolic_depth;
        } else {
            e["log_a"] = iv.lo;
            e["log_d"] = iv.hi;
            e["a"] = finite_or_null(std::exp(iv.lo));
            e["d"] = finite_or_null(std::exp(iv.hi));
            e["err"] = std::max(iv.lo_err, iv.hi_err);
        }
        e["crooked"] = iv.crooked();
        if (iv.witness) {
            const auto& w = *iv.witness;
            e["witness"] = {{"pattern", w.pattern == Pattern::BCB ? "BCB" : "CBC"},
                            {"t1", w.t1},
                            {"t_mid", w.t_mid},
                            {"t2", w.t2},
                            {"margin", finite_or_null(w.margin)},
                            {"inherited", w.inherited}};
        }
        j["intervals"].push_back(e);
    }
    j["crooked"] = crooked_count();
    j["total"] = intervals.size();
    return j;
}

IntervalFamily base_family(const Quadruple& q) {
    // Covers only need I = [A, D] inside [6, inf); the >= 9 rule is for the schedule.
    if (!(q.A >= 6.0 && q.A < q.B && q.B < q.C && q.C < q.D)) throw std::invalid_argument("need 6 <= A < B < C < D");
    IntervalFamily f;
    f.q = q;
    CoverInterval iv;
    iv.lo = std::log(q.A);
    iv.hi = std::log(q.D);
    iv.b_points = {{std::log(q.B), 0.0}};
    iv.c_points = {{std::log(q.C), 0.0}};
    f.intervals.push_back(iv);
    return f;
}

std::optional<CrookednessWitness> find_witness(const std::vector<Root>& b, const std::vector<Root>& c) {
    std::optional<CrookednessWitness> best;
    auto consider = [&](Pattern pat, const std::vector<Root>& outer, const std::vector<Root>& inner) {
        if (outer.size() < 2) return;
        for (const Root& m : inner) {
            auto right = std::upper_bound(outer.begin(), outer.end(), m.lambda, [](double v, const Root& r) { return v < r.lambda; });
            if (right == outer.begin() || right == outer.end()) continue;
            const Root& l = *(right - 1);
            const Root& r = *right;
            const double gap = std::min(m.lambda - l.lambda, r.lambda - m.lambda);
            const double bar = std::max({l.err, m.err, r.err, 1e-300});
            CrookednessWitness w{pat, l.lambda, m.lambda, r.lambda, gap / bar, false};
            if (!best || w.margin > best->margin) best = w;
        }
    };
    consider(Pattern::BCB, b, c);
    consider(Pattern::CBC, c, b);
    return best;
}

IntervalFamily pull_back(const ProjectionMap& phi, const IntervalFamily& fam) {
    IntervalFamily out;
    out.q = fam.q;
    out.n = fam.n + 1;
    for (std::size_t pi = 0; pi < fam.intervals.size(); ++pi) {
        const CoverInterval& P = fam.intervals[pi];
        if (P.symbolic() || P.hi > kSymbolicLog) {
            if (!P.symbolic() && std::exp(std::min(P.lo, kSymbolicLog)) <= phi.monotone_above())
                throw RangeError("cover interval straddles the representable range inside the wiggles");
            CoverInterval c;
            c.symbolic_depth = P.symbolic_depth + 1;
            c.parent = pi;
            c.lo_maps_to_A = P.lo_maps_to_A;
            c.witness = P.witness;
            if (c.witness) c.witness->inherited = true;
            out.intervals.push_back(std::move(c));
            continue;
        }
        const double x_lo = std::exp(P.lo), x_hi = std::exp(P.hi);
        struct Mark {
            double lambda, err;
            bool from_lo;
        };
        std::vector<Mark> marks;
        for (const Root& r : phi.preimages(x_lo, -1.0, kInf, x_lo * P.lo_err)) marks.push_back({r.lambda, r.err, true});
        for (const Root& r : phi.preimages(x_hi, -1.0, kInf, x_hi * P.hi_err)) marks.push_back({r.lambda, r.err, false});
        std::sort(marks.begin(), marks.end(), [](const Mark& a, const Mark& b) { return a.lambda < b.lambda; });

        auto pull_marks = [&](const std::vector<Root>& pts) {
            std::vector<Root> all;
            for (const Root& p : pts) {
                const double x = std::exp(p.lambda);
                for (const Root& r : phi.preimages(x, -1.0, kInf, x * p.err)) all.push_back(r);
            }
            std::sort(all.begin(), all.end(), [](const Root& a, const Root& b) { return a.lambda < b.lambda; });
            return all;
        };
        const std::vector<Root> bs = pull_marks(P.b_points), cs = pull_marks(P.c_points);

        for (std::size_t i = 0; i + 1 < marks.size(); ++i) {
            if (marks[i].from_lo == marks[i + 1].from_lo) continue;
            CoverInterval c;
            c.lo = marks[i].lambda;
            c.hi = marks[i + 1].lambda;
            c.lo_err = marks[i].err;
            c.hi_err = marks[i + 1].err;
            c.lo_maps_to_A = marks[i].from_lo ? P.lo_maps_to_A : !P.lo_maps_to_A;
            c.parent = pi;
            auto inside = [&](const std::vector<Root>& pts) {
                std::vector<Root> v;
                for (const Root& r : pts)
                    if (r.lambda > c.lo && r.lambda < c.hi) v.push_back(r);
                return v;
            };
            c.b_points = inside(bs);
            c.c_points = inside(cs);
            c.witness = find_witness(c.b_points, c.c_points);
            out.intervals.push_back(std::move(c));
        }
    }
    // Children of consecutive parents interleave only if the family is broken;
    // keep the output sorted all the same (symbolic ones last, in parent order).
    std::stable_sort(out.intervals.begin(), out.intervals.end(), [](const CoverInterval& a, const CoverInterval& b) {
        if (a.symbolic() != b.symbolic()) return !a.symbolic();
        return !a.symbolic() && a.lo < b.lo;
    });
    return out;
}

std::vector<IntervalFamily> cover_levels(const ProjectionMap& phi, const Quadruple& q, int n) {
    std::vector<IntervalFamily> levels{base_family(q)};
    for (int k = 1; k <= n; ++k) levels.push_back(pull_back(phi, levels.back()));
    return levels;
}

IntervalFamily minimal_covers(const ProjectionMap& phi, const Quadruple& q, int n) {
    IntervalFamily f = base_family(q);
    for (int k = 1; k <= n; ++k) f = pull_back(phi, f);
    return f;
}

std::optional<CrookednessWitness> is_crooked(const ProjectionMap& phi, double lo, double hi, int n, const Quadruple& q) {
    // Forward images J_k = phi^k(J), as [lo, hi] in log t.
    std::vector<std::pair<double, double>> J{{lo, hi}};
    const auto turns = phi.turning_points();
    for (int k = 0; k < n; ++k) {
        const auto [a, b] = J.back();
        double mn = std::min(phi.value_log(a), phi.value_log(b)), mx = std::max(phi.value_log(a), phi.value_log(b));
        for (double t : turns)
            if (t > a && t < b) {
                const double v = phi.value_log(t);
                mn = std::min(mn, v);
                mx = std::max(mx, v);
            }
        J.emplace_back(std::log(mn), std::log(mx));
    }
    const auto [a_n, d_n] = J.back();
    const double slack = 10 * phi.eps();
    if (std::exp(a_n) > q.A + slack || std::exp(d_n) < q.D - slack) return std::nullopt;

    auto pull = [&](double target) {
        std::vector<Root> pts;
        if (std::log(target) >= J[n].first && std::log(target) <= J[n].second) pts.push_back({std::log(target), 0.0});
        for (int k = n - 1; k >= 0; --k) {
            std::vector<Root> next;
            for (const Root& p : pts) {
                const double x = std::exp(p.lambda);
                if (!std::isfinite(x)) throw RangeError("is_crooked: marked point beyond representable range");
                for (const Root& r : phi.preimages(x, J[k].first, J[k].second, x * p.err)) next.push_back(r);
            }
            std::sort(next.begin(), next.end(), [](const Root& x, const Root& y) { return x.lambda < y.lambda; });
            pts = std::move(next);
        }
        return pts;
    };
    return find_witness(pull(q.B), pull(q.C));
}

HypothesisResult hypothesis_check(const ProjectionMap& phi, const Quadruple& q, int n_lo, int n_hi) {
    HypothesisResult res;
    res.n_lo = n_lo;
    const auto levels = cover_levels(phi, q, n_hi + 1);
    for (int n = n_lo; n <= n_hi; ++n) {
        const IntervalFamily& f = levels[static_cast<std::size_t>(n)];
        res.counts.emplace_back(f.crooked_count(), f.intervals.size());
        res.family = f;
        if (f.all_crooked() && f.min_margin() > 10.0) {
            res.ok = true;
            res.n_star = n;
            res.min_margin = f.min_margin();
            res.persists = levels[static_cast<std::size_t>(n + 1)].all_crooked();
            res.message = "all minimal intervals crooked";
            return res;
        }
    }
    char buf[96];
    const auto& last = res.counts.back();
    std::snprintf(buf, sizeof buf, "no n in [%d, %d] with every interval crooked (last: %zu of %zu)", n_lo, n_hi, last.first, last.second);
    res.message = buf;
    return res;
}

int stabilize_n0(const ProjectionMap& phi, const Quadruple& q, double nu0, int n_cap) {
    const auto& spec = phi.kernel().spec();
    if (spec.empty()) return 0;
    const double edge = std::log(spec.R.back() + nu0);
    IntervalFamily f = base_family(q);
    for (int n = 0; n <= n_cap; ++n) {
        if (n > 0) f = pull_back(phi, f);
        const bool right = std::all_of(f.intervals.begin(), f.intervals.end(),
                                       [&](const CoverInterval& j) { return j.symbolic() || j.lo > edge; });
        if (right) return n;
    }
    throw RangeError("stabilize_n0: cap reached before covers left the last wiggle");
}

}  // namespace tractlab
