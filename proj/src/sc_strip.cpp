#include "tractlab/sc_strip.hpp"

#include <Eigen/Core>
#include <unsupported/Eigen/NonLinearOptimization>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace tractlab {

namespace {

constexpr double kLn2 = 0.69314718055994530942;

using GK = boost::math::quadrature::gauss_kronrod<double, 31>;

// exp(z) - 1 without cancellation for small z.
cplx expm1c(cplx z) {
    const double x = z.real(), y = z.imag();
    const double s = std::sin(0.5 * y);
    return {std::expm1(x) * std::cos(y) - 2.0 * s * s, std::exp(x) * std::sin(y)};
}

// Principal-ish log sinh(v) that never forms exp of a large positive number.
cplx log_sinh(cplx v) {
    if (v.real() >= 0.0) return v - kLn2 + std::log(-expm1c(-2.0 * v));
    return -v - kLn2 + std::log(-expm1c(2.0 * v)) + cplx(0.0, kPi);
}

double log_abs_sinh(double a) {
    a = std::abs(a);
    return a - kLn2 + std::log(-std::expm1(-2.0 * a));
}

double log_cosh(double a) {
    a = std::abs(a);
    return a - kLn2 + std::log1p(std::exp(-2.0 * a));
}

}  // namespace

StripSC::StripSC(std::vector<Prevertex> pv) : pv_(std::move(pv)) {
    cplx lc(std::log(2.0), 0.0);
    for (const auto& p : pv_) lc += p.beta * (0.5 * p.u() + kLn2);
    log_c_ = lc;
}

cplx StripSC::log_term(std::size_t k, cplx offset) const {
    cplx L = log_sinh(0.5 * offset);
    double im = std::remainder(L.imag(), 2.0 * kPi);
    // Top prevertices: sinh((u-u_k)/2) lives in the lower half-plane, bottom ones in the upper.
    if (pv_[k].line > 0 && im > kPi / 2) im -= 2.0 * kPi;
    if (pv_[k].line < 0 && im < -kPi / 2) im += 2.0 * kPi;
    return {L.real(), im};
}

cplx StripSC::log_dfdu(cplx u) const {
    cplx s = log_c_ + 0.5 * u;
    for (std::size_t k = 0; k < pv_.size(); ++k) s += pv_[k].beta * log_term(k, u - pv_[k].u());
    return s;
}

cplx StripSC::log_dfdu_at(std::size_t k, cplx offset) const {
    const cplx uk = pv_[k].u();
    cplx s = log_c_ + 0.5 * (uk + offset);
    for (std::size_t j = 0; j < pv_.size(); ++j) {
        if (j == k) {
            s += pv_[j].beta * log_term(j, offset);
        } else {
            const cplx d(pv_[k].lambda - pv_[j].lambda, (pv_[k].line - pv_[j].line) * kPi / 2);
            s += pv_[j].beta * log_term(j, d + offset);
        }
    }
    return s;
}

double StripSC::log_abs_dfdu_on_line(double x, int line, long k, double dk) const {
    double s = log_c_.real() + 0.5 * x;
    for (std::size_t j = 0; j < pv_.size(); ++j) {
        const auto& p = pv_[j];
        if (static_cast<long>(j) == k) {
            s += p.beta * log_abs_sinh(0.5 * dk);
        } else if (p.line == line) {
            s += p.beta * log_abs_sinh(0.5 * (x - p.lambda));
        } else {
            s += p.beta * log_cosh(0.5 * (x - p.lambda));
        }
    }
    return s;
}

double StripSC::side_length(std::size_t i, std::size_t j, double tol) const {
    const auto& pi = pv_[i];
    const auto& pj = pv_[j];
    if (pi.line != pj.line) throw std::logic_error("side_length across lines");
    const int line = pi.line;
    const double a = pi.lambda, b = pj.lambda, L = b - a;
    if (!(L > 0)) return 0.0;
    const double h0 = std::min(1.0, L / 3.0);
    double err = 0.0;

    // End pieces: x = a + h0 s^2 (resp. b - h0 s^2) turns |x-a|^beta into a smooth function of s.
    auto left = [&](double s) {
        const double d = h0 * s * s;
        return std::exp(log_abs_dfdu_on_line(a + d, line, static_cast<long>(i), d)) * 2.0 * h0 * s;
    };
    auto right = [&](double s) {
        const double d = h0 * s * s;
        return std::exp(log_abs_dfdu_on_line(b - d, line, static_cast<long>(j), d)) * 2.0 * h0 * s;
    };
    double total = GK::integrate(left, 0.0, 1.0, 12, tol, &err);
    total += GK::integrate(right, 0.0, 1.0, 12, tol, &err);

    const double lo = a + h0, hi = b - h0;
    if (hi > lo) {
        std::vector<double> cuts{lo, hi};
        for (const auto& p : pv_) {
            if (p.line == line) continue;
            for (double c : {p.lambda - 2.0, p.lambda, p.lambda + 2.0})
                if (c > lo && c < hi) cuts.push_back(c);
        }
        std::sort(cuts.begin(), cuts.end());
        auto mid = [&](double x) { return std::exp(log_abs_dfdu_on_line(x, line)); };
        for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
            const double c0 = cuts[k], c1 = cuts[k + 1];
            if (c1 - c0 <= 0) continue;
            const int pieces = std::max(1, static_cast<int>(std::ceil((c1 - c0) / 8.0)));
            for (int p = 0; p < pieces; ++p) {
                const double x0 = c0 + (c1 - c0) * p / pieces, x1 = c0 + (c1 - c0) * (p + 1) / pieces;
                total += GK::integrate(mid, x0, x1, 12, tol, &err);
            }
        }
    }
    return total;
}

cplx StripSC::integrate_plain(cplx a, cplx b, double tol, int depth) const {
    const cplx d = b - a;
    auto g = [&](double t) { return std::exp(log_dfdu(a + t * d)) * d; };
    double err = 0.0, l1 = 0.0;
    const cplx v = GK::integrate(g, 0.0, 1.0, 8, tol, &err, &l1);
    if (depth > 0 && err > tol * std::max(1.0, l1) * 10) {
        const cplx m = 0.5 * (a + b);
        return integrate_plain(a, m, tol, depth - 1) + integrate_plain(m, b, tol, depth - 1);
    }
    return v;
}

cplx StripSC::integrate(cplx a, cplx b, long ka, long kb, double tol) const {
    if (a == b) return {0.0, 0.0};
    if (ka >= 0 && kb >= 0) {
        const cplx m = 0.5 * (a + b);
        return integrate(a, m, ka, -1, tol) + integrate(m, b, -1, kb, tol);
    }
    double err = 0.0;
    const cplx d = b - a;
    if (ka >= 0) {
        const auto k = static_cast<std::size_t>(ka);
        const cplx base = a - pv_[k].u();
        auto g = [&](double s) { return std::exp(log_dfdu_at(k, base + s * s * d)) * (2.0 * s) * d; };
        return GK::integrate(g, 0.0, 1.0, 12, tol, &err);
    }
    if (kb >= 0) {
        const auto k = static_cast<std::size_t>(kb);
        const cplx base = b - pv_[k].u();
        auto g = [&](double s) { return std::exp(log_dfdu_at(k, base - s * s * d)) * (2.0 * s) * d; };
        return GK::integrate(g, 0.0, 1.0, 12, tol, &err);
    }
    return integrate_plain(a, b, tol, 10);
}

long StripSC::nearest_prevertex(cplx u, double* dist) const {
    long best = -1;
    double bd = 1e300;
    for (std::size_t k = 0; k < pv_.size(); ++k) {
        const double d = std::abs(u - pv_[k].u());
        if (d < bd) {
            bd = d;
            best = static_cast<long>(k);
        }
    }
    if (dist) *dist = bd;
    return best;
}

std::vector<Prevertex> initial_prevertices(const TractBoundary& b) {
    // Conformal length grows by pi/width per unit along the corridor: 1/2 in the
    // full strip, 3/2 in a channel of width 2pi/3. The turn offsets were read
    // off converged solutions; long channels only add the asymptotic rate.
    std::vector<double> top{0.0}, bot{0.0};
    double in = 0.0, x = 4.0;
    for (std::size_t j = 0; j < b.spec.size(); ++j) {
        const double r = b.spec.r[j], R = b.spec.R[j];
        in = (j == 0 ? 0.23 : in) + 0.5 * (r - x);
        const double t1 = in + 1.5 * (R - 1 - r) + 2.47;   // tip at R-1 + i pi/3
        const double t2 = t1 + 1.5 * (R - r - 2) + 3.78;   // tip at r+1 - i pi/3
        const double e = t2 + 1.5 * (R - r - 1) + 2.47;    // leaving the bottom channel
        bot.insert(bot.end(), {in - 2.2, in, t1, t2 - 2.05, t2 + 2.05});
        top.insert(top.end(), {t1 - 2.05, t1 + 2.05, t2, e, e + 2.19});
        in = e + 2.44;
        x = R;
    }
    // Short straight runs can push the offsets out of order.
    for (auto* line : {&top, &bot})
        for (std::size_t k = 1; k < line->size(); ++k) (*line)[k] = std::max((*line)[k], (*line)[k - 1] + 0.25);
    std::vector<Prevertex> pv;
    for (std::size_t k = 0; k + 1 < b.upper.size(); ++k)
        pv.push_back({top[k], +1, b.upper[k].turn, b.upper[k].z});
    for (std::size_t k = 0; k + 1 < b.lower.size(); ++k)
        pv.push_back({bot[k], -1, b.lower[k].turn, b.lower[k].z});
    return pv;
}

namespace {

struct SideEquations {
    using Scalar = double;
    using InputType = Eigen::VectorXd;
    using ValueType = Eigen::VectorXd;
    using JacobianType = Eigen::MatrixXd;
    enum { InputsAtCompileTime = Eigen::Dynamic, ValuesAtCompileTime = Eigen::Dynamic };

    std::vector<Prevertex> base;
    std::size_t ntop = 0, nbot = 0;  // prevertex counts per line
    double tol = 1e-12;
    mutable int evals = 0;

    int inputs() const { return static_cast<int>(ntop + nbot - 2); }
    int values() const { return inputs(); }

    std::vector<Prevertex> place(const Eigen::VectorXd& g) const {
        auto pv = base;
        double lam = 0.0;
        pv[0].lambda = 0.0;
        for (std::size_t k = 1; k < ntop; ++k) {
            lam += std::exp(g[static_cast<Eigen::Index>(k - 1)]);
            pv[k].lambda = lam;
        }
        lam = 0.0;
        pv[ntop].lambda = 0.0;
        for (std::size_t k = 1; k < nbot; ++k) {
            lam += std::exp(g[static_cast<Eigen::Index>(ntop - 1 + k - 1)]);
            pv[ntop + k].lambda = lam;
        }
        return pv;
    }

    int operator()(const Eigen::VectorXd& g, Eigen::VectorXd& f) const {
        ++evals;
        const StripSC sc(place(g));
        const auto& pv = sc.prevertices();
        Eigen::Index row = 0;
        auto side = [&](std::size_t i, std::size_t j) {
            const double target = std::abs(pv[j].vertex - pv[i].vertex);
            const double got = sc.side_length(i, j, tol);
            f[row++] = std::log(got / target);
        };
        for (std::size_t k = 0; k + 1 < ntop; ++k) side(k, k + 1);
        for (std::size_t k = 0; k + 1 < nbot; ++k) side(ntop + k, ntop + k + 1);
        for (Eigen::Index i = 0; i < f.size(); ++i)
            if (!std::isfinite(f[i])) f[i] = 50.0;
        return 0;
    }
};

}  // namespace

StripSC solve_strip_sc(const TractBoundary& b, const SolveOptions& opt, SolveReport* report) {
    SolveReport rep;
    auto pv = initial_prevertices(b);
    const std::size_t ntop = b.upper.size() - 1, nbot = b.lower.size() - 1;
    if (ntop + nbot <= 2) {
        rep.converged = true;
        rep.message = "no free parameters";
        if (report) *report = rep;
        return StripSC(std::move(pv));
    }

    SideEquations eq;
    eq.base = pv;
    eq.ntop = ntop;
    eq.nbot = nbot;
    eq.tol = std::max(1e-13, opt.tol * 1e-2);

    Eigen::VectorXd g(eq.inputs());
    for (std::size_t k = 1; k < ntop; ++k) g[static_cast<Eigen::Index>(k - 1)] = std::log(pv[k].lambda - pv[k - 1].lambda);
    for (std::size_t k = 1; k < nbot; ++k)
        g[static_cast<Eigen::Index>(ntop - 1 + k - 1)] = std::log(pv[ntop + k].lambda - pv[ntop + k - 1].lambda);

    Eigen::HybridNonLinearSolver<SideEquations> solver(eq);
    solver.parameters.xtol = 1e-14;
    solver.parameters.maxfev = opt.max_evals;
    solver.solveNumericalDiff(g);
    rep.iterations = eq.evals;

    Eigen::VectorXd f(eq.values());
    eq(g, f);
    rep.max_residual = f.cwiseAbs().maxCoeff();
    rep.converged = rep.max_residual < opt.tol;
    rep.message = rep.converged ? "converged" : "side lengths not matched";
    if (report) *report = rep;
    return StripSC(eq.place(g));
}

}  // namespace tractlab
