#include "tractlab/conformal_map.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numeric>
#include <random>

namespace tractlab {

namespace {

// Past this lambda the shift i*b is below double resolution relative to |w|.
constexpr double kLinearLimit = 500.0;

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

}  // namespace

double LogPolarPoint::log_re() const { return lambda + std::log(std::cos(theta)); }

std::string spec_hash(const WiggleSpec& spec) {
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&](std::uint64_t v) {
        for (int i = 0; i < 8; ++i) {
            h ^= (v >> (8 * i)) & 0xffu;
            h *= 1099511628211ull;
        }
    };
    mix(spec.r.size());
    for (double v : spec.r) mix(std::bit_cast<std::uint64_t>(v));
    for (double v : spec.R) mix(std::bit_cast<std::uint64_t>(v));
    return hex64(h);
}

MapKernel MapKernel::build(const WiggleSpec& spec, const MapOptions& opt) {
    const auto chk = validate_spec(spec);
    if (!chk.ok) throw std::invalid_argument("invalid wiggle spec: " + chk.violation);
    const TractBoundary boundary = build_boundary(spec, default_xmax(spec));

    MapKernel k;
    k.spec_ = spec;
    k.opt_ = opt;
    double quad_tol = std::clamp(opt.eps_target * 1e-6, 1e-14, 1e-9);
    double achieved = 0.0;
    for (int round = 0; round <= opt.max_refinements; ++round) {
        SolveOptions so;
        so.tol = std::max(10 * quad_tol, 1e-13);
        SolveReport rep;
        k.sc_ = solve_strip_sc(boundary, so, &rep);
        k.solve_residual_ = rep.max_residual;
        k.assemble(quad_tol);
        achieved = k.eps_map_;
        if (rep.converged && achieved <= opt.eps_target) return k;
        quad_tol = std::max(quad_tol * 0.1, 1e-15);
        k.opt_.table_step *= 0.5;
    }
    char buf[160];
    std::snprintf(buf, sizeof buf, "resolution exceeded: achieved eps_map=%.3e (target %.3e), side residual %.3e",
                  achieved, opt.eps_target, k.solve_residual_);
    throw ResolutionError(buf);
}

void MapKernel::assemble(double quad_tol) {
    quad_tol_ = quad_tol;
    const auto& pv = sc_.prevertices();
    double lam_max = 0.0;
    for (const auto& p : pv) lam_max = std::max(lam_max, p.lambda);

    h_ = opt_.table_step;
    xs_ = -40.0;
    xe_ = std::ceil((lam_max + opt_.tail_margin) / h_) * h_;
    const auto n = static_cast<std::size_t>(std::llround((xe_ - xs_) / h_)) + 1;
    const auto i0 = static_cast<std::size_t>(std::llround(-xs_ / h_));
    table_.assign(n, cplx{});

    // Anchor at the corner 4 + i pi (first upper prevertex sits at lambda = 0).
    table_[i0] = pv[0].vertex + sc_.integrate(pv[0].u(), cplx(0.0, 0.0), 0, -1, quad_tol_);
    for (std::size_t i = i0 + 1; i < n; ++i) {
        const double x0 = xs_ + h_ * static_cast<double>(i - 1), x1 = xs_ + h_ * static_cast<double>(i);
        table_[i] = table_[i - 1] + sc_.integrate(x0, x1, -1, -1, quad_tol_);
    }
    for (std::size_t i = i0; i-- > 0;) {
        const double x0 = xs_ + h_ * static_cast<double>(i + 1), x1 = xs_ + h_ * static_cast<double>(i);
        table_[i] = table_[i + 1] + sc_.integrate(x0, x1, -1, -1, quad_tol_);
    }
    // f' ~ const * e^u far left, so the rest of the left end integrates in closed form.
    d_left_ = std::exp(sc_.log_dfdu(cplx(xs_, 0.0)));
    z_left_ = table_.front() - d_left_;
    c_inf_ = table_.back() - 2.0 * xe_;

    // Newton seeds on a (Re u, Im u) lattice, marched off the real axis.
    slits_ = build_boundary(spec_, default_xmax(spec_)).slits;
    seeds_.clear();
    const int levels = 12;
    const double ymax = 1.52;
    const double seed_step = 0.5;
    for (double x = -20.0; x <= xe_ + 1e-9; x += seed_step) {
        const auto i = static_cast<long>(std::llround((x - xs_) / h_));
        const cplx base = table_[static_cast<std::size_t>(i)];
        seeds_.push_back({cplx(x, 0.0), base});
        for (int dir : {+1, -1}) {
            cplx zprev = base, uprev(x, 0.0);
            for (int j = 1; j <= levels; ++j) {
                const cplx u(x, dir * ymax * j / levels);
                zprev += sc_.integrate(uprev, u, -1, -1, quad_tol_);
                uprev = u;
                seeds_.push_back({u, zprev});
            }
        }
    }
    // Corners need their own seeds: near a prevertex f behaves like a power.
    for (std::size_t k = 0; k < pv.size(); ++k) {
        const cplx uk = pv[k].u();
        for (double rho : {0.003, 0.01, 0.03, 0.1, 0.3, 0.6})
            for (int a = 1; a < 8; ++a) {
                const double alpha = -pv[k].line * kPi * a / 8.0;
                const cplx u = uk + std::polar(rho, alpha);
                seeds_.push_back({u, pv[k].vertex + sc_.integrate(uk, u, static_cast<long>(k), -1, quad_tol_)});
            }
    }
    double lo = 1e300, hi = -1e300;
    for (const auto& s : seeds_) {
        lo = std::min(lo, s.z.real());
        hi = std::max(hi, s.z.real());
    }
    bucket_x0_ = std::floor(lo);
    buckets_.assign(static_cast<std::size_t>(hi - bucket_x0_) + 2, {});
    for (std::size_t s = 0; s < seeds_.size(); ++s)
        buckets_[static_cast<std::size_t>(seeds_[s].z.real() - bucket_x0_)].push_back(s);

    // Normalisation F(5) = 5 via w = a exp(u) + i b.
    a_ = 1.0;
    b_ = 0.0;
    const cplx u5 = tract_to_strip(cplx(5.0, 0.0));
    const cplx W5 = std::exp(u5);
    a_ = 5.0 / W5.real();
    b_ = -a_ * W5.imag();

    eps_map_ = std::max({vertex_closure_error(), table_consistency_error(), round_trip_error()});
}

cplx MapKernel::table_eval(cplx u, long index) const {
    index = std::clamp(index, 0L, static_cast<long>(table_.size()) - 1);
    const double x = xs_ + h_ * static_cast<double>(index);
    return table_[static_cast<std::size_t>(index)] + sc_.integrate(cplx(x, 0.0), u, -1, -1, quad_tol_);
}

cplx MapKernel::strip_to_tract(cplx u) const {
    if (u.real() >= xe_) return 2.0 * u + c_inf_;
    if (u.real() <= xs_) return z_left_ + d_left_ * std::exp(u - xs_);
    double d = 0.0;
    const long k = sc_.nearest_prevertex(u, &d);
    if (k >= 0 && d < 0.5) {
        const auto& p = sc_.prevertices()[static_cast<std::size_t>(k)];
        return p.vertex + sc_.integrate(p.u(), u, k, -1, quad_tol_);
    }
    return table_eval(u, std::lround((u.real() - xs_) / h_));
}

bool MapKernel::newton(cplx z, cplx seed, cplx* out) const {
    const double tol = 1e-13 * std::max(1.0, std::abs(z));
    cplx u = seed;
    cplx r = strip_to_tract(u) - z;
    for (int it = 0; it < 60; ++it) {
        if (std::abs(r) <= tol) break;
        const cplx step = r / std::exp(sc_.log_dfdu(u));
        double t = 1.0;
        bool moved = false;
        for (int half = 0; half < 40; ++half, t *= 0.5) {
            const cplx un = u - t * step;
            if (!(std::abs(un.imag()) < kPi / 2)) continue;
            const cplx rn = strip_to_tract(un) - z;
            if (std::abs(rn) < std::abs(r)) {
                u = un;
                r = rn;
                moved = true;
                break;
            }
        }
        if (!moved) break;
    }
    if (std::abs(r) <= 1e-10 * std::max(1.0, std::abs(z))) {
        *out = u;
        return true;
    }
    return false;
}

bool MapKernel::visible(cplx a, cplx b) const {
    auto cross = [](cplx p, cplx q) { return p.real() * q.imag() - p.imag() * q.real(); };
    for (const auto& sl : slits_) {
        const cplx d = b - a, e = sl.b - sl.a;
        const double den = cross(d, e);
        if (den == 0.0) continue;
        const double t = cross(sl.a - a, e) / den, s = cross(sl.a - a, d) / den;
        if (t >= 0.0 && t <= 1.0 && s >= 0.0 && s <= 1.0) return false;
    }
    return true;
}

cplx MapKernel::tract_to_strip(cplx z) const {
    if (classify(spec_, z) != Membership::inside) throw DomainError("point outside the tract");
    // Exact tail on the right, exact exponential end on the left.
    const cplx ut = 0.5 * (z - c_inf_);
    if (ut.real() >= xe_) return ut;
    const cplx ul = xs_ + std::log((z - z_left_) / d_left_);
    if (ul.real() <= xs_ && std::abs(ul.imag()) < kPi / 2) return ul;

    std::vector<std::pair<double, std::size_t>> cand;
    const long b0 = static_cast<long>(std::floor(z.real() - bucket_x0_));
    for (long span = 3; span < 1000; span *= 4) {
        cand.clear();
        for (long b = b0 - span; b <= b0 + span; ++b) {
            if (b < 0 || b >= static_cast<long>(buckets_.size())) continue;
            for (auto s : buckets_[static_cast<std::size_t>(b)])
                if (visible(seeds_[s].z, z)) cand.emplace_back(std::abs(seeds_[s].z - z), s);
        }
        if (cand.size() >= 4) break;
    }
    std::sort(cand.begin(), cand.end());
    cplx u;
    const std::size_t tries = std::min<std::size_t>(cand.size(), 16);
    for (std::size_t c = 0; c < tries; ++c)
        if (newton(z, seeds_[cand[c].second].u, &u)) return u;
    // Continuation along the straight segment from the nearest visible seeds.
    for (std::size_t c = 0; c < std::min<std::size_t>(cand.size(), 4); ++c) {
        const Seed& sd = seeds_[cand[c].second];
        cplx cur = sd.u;
        bool ok = true;
        const int steps = 16;
        for (int k = 1; k <= steps && ok; ++k)
            ok = newton(sd.z + (z - sd.z) * (static_cast<double>(k) / steps), cur, &cur);
        if (ok) return cur;
    }
    throw ResolutionError("strip inverse did not converge");
}

LogPolarPoint MapKernel::strip_to_w(cplx u) const {
    if (u.real() + std::log(a_) < kLinearLimit) return LogPolarPoint::from(a_ * std::exp(u) + cplx(0.0, b_));
    return {std::log(a_) + u.real(), u.imag()};
}

cplx MapKernel::w_to_strip(LogPolarPoint w) const {
    if (w.lambda < kLinearLimit) {
        const cplx W = (w.value() - cplx(0.0, b_)) / a_;
        return std::log(W);
    }
    return {w.lambda - std::log(a_), w.theta};
}

cplx MapKernel::dstrip_dlambda(double lambda) const {
    if (lambda >= kLinearLimit) return {1.0, 0.0};
    const double t = std::exp(lambda);
    return t / cplx(t, -b_);
}

LogPolarPoint MapKernel::forward(cplx z) const { return strip_to_w(tract_to_strip(z)); }

cplx MapKernel::inverse(LogPolarPoint w) const { return strip_to_tract(w_to_strip(w)); }

double MapKernel::log_abs_derivative(cplx z) const {
    const cplx u = tract_to_strip(z);
    // dw/du = a e^u up to the shift, which does not depend on u.
    return std::log(a_) + u.real() - sc_.log_dfdu(u).real();
}

DerivativeEstimate MapKernel::derivative_modulus(cplx z) const {
    const double dist = boundary_distance(spec_, z);
    if (dist < 1e-6) throw DomainError("derivative unreliable: point within 1e-6 of the boundary");
    DerivativeEstimate d;
    d.log_value = log_abs_derivative(z);
    d.value = std::exp(d.log_value);
    const double h = std::min(1e-3, dist / 8);
    auto logF = [&](cplx p) {
        const auto w = forward(p);
        return cplx(w.lambda, w.theta);
    };
    const cplx dlog = (logF(z + h) - logF(z - h)) / (2.0 * h);
    const double num = forward(z).lambda + std::log(std::abs(dlog));
    d.rel_err = std::abs(std::expm1(num - d.log_value));
    return d;
}

double MapKernel::hyperbolic_density(cplx z) const {
    return std::exp(log_abs_derivative(z) - forward(z).log_re());
}

GeodesicArc MapKernel::vertical_geodesic(double lambda, int samples) const {
    GeodesicArc g;
    g.lambda = lambda;
    const int n = std::max(samples, 3);
    g.polyline.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const double theta = -kPi / 2 + kPi * 0.5 * (1.0 - std::cos(kPi * i / (n - 1)));
        cplx u = w_to_strip({lambda, theta});
        u.imag(std::clamp(u.imag(), -kPi / 2, kPi / 2));
        g.polyline.push_back(strip_to_tract(u));
    }
    for (std::size_t i = 0; i < g.polyline.size(); ++i)
        for (std::size_t j = i + 1; j < g.polyline.size(); ++j) g.diam = std::max(g.diam, std::abs(g.polyline[i] - g.polyline[j]));
    return g;
}

NuEstimate MapKernel::estimate_nu(double lambda_lo, double lambda_hi, double step, int samples) const {
    NuEstimate e;
    const auto count = static_cast<long>(std::floor((lambda_hi - lambda_lo) / step + 1e-9));
    for (long k = 0; k <= count; ++k) {
        const double lam = lambda_lo + step * static_cast<double>(k);
        const auto g = vertical_geodesic(lam, samples);
        ++e.geodesics;
        if (g.diam > e.nu) {
            e.nu = g.diam;
            e.argmax_lambda = lam;
        }
    }
    return e;
}

NuEstimate MapKernel::estimate_nu(double step, int samples) const {
    double lam_max = 0.0;
    for (const auto& p : sc_.prevertices()) lam_max = std::max(lam_max, p.lambda);
    return estimate_nu(std::log(4.0), lam_max + std::log(a_) + 10.0, step, samples);
}

double MapKernel::vertex_closure_error() const {
    double err = 0.0;
    const auto& pv = sc_.prevertices();
    for (std::size_t k = 0; k < pv.size(); ++k) {
        const long i = std::lround((pv[k].lambda - xs_) / h_);
        const double x = xs_ + h_ * static_cast<double>(i);
        const cplx z = table_[static_cast<std::size_t>(i)] + sc_.integrate(cplx(x, 0.0), pv[k].u(), -1, static_cast<long>(k), quad_tol_);
        err = std::max(err, std::abs(z - pv[k].vertex));
    }
    return err;
}

double MapKernel::table_consistency_error() const {
    std::mt19937_64 rng(12345);
    std::uniform_real_distribution<double> ux(-5.0, xe_ - 1.0), uy(-1.45, 1.45);
    double err = 0.0;
    for (int s = 0; s < 200; ++s) {
        const cplx u(ux(rng), uy(rng));
        const long i = static_cast<long>(std::floor((u.real() - xs_) / h_));
        err = std::max(err, std::abs(table_eval(u, i) - table_eval(u, i + 1)));
    }
    return err;
}

double MapKernel::round_trip_error() const {
    std::mt19937_64 rng(777);
    std::uniform_real_distribution<double> ux(-5.0, xe_ - 1.0), uy(-1.4, 1.4);
    double err = 0.0;
    for (int s = 0; s < 100; ++s) {
        const cplx z = strip_to_tract(cplx(ux(rng), uy(rng)));
        if (boundary_distance(spec_, z) < 1e-6) continue;
        err = std::max(err, std::abs(inverse(forward(z)) - z));
    }
    return err;
}

std::string MapKernel::fingerprint() const {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s/%.3e", spec_hash(spec_).c_str(), quad_tol_);
    return buf;
}

nlohmann::json MapKernel::to_json() const {
    nlohmann::json j;
    j["format"] = "tractlab-kernel";
    j["version"] = 1;
    j["spec_hash"] = spec_hash(spec_);
    j["spec"] = {{"r", spec_.r}, {"R", spec_.R}};
    auto& nodes = j["nodes"] = nlohmann::json::array();
    for (const auto& p : sc_.prevertices())
        nodes.push_back({{"lambda", p.lambda}, {"line", p.line}, {"beta", p.beta}, {"x", p.vertex.real()}, {"y", p.vertex.imag()}});
    j["normalization"] = {{"scale", a_}, {"shift", b_}};
    j["eps_map"] = eps_map_;
    j["quad_tol"] = quad_tol_;
    j["options"] = {{"eps_target", opt_.eps_target}, {"table_step", opt_.table_step}, {"tail_margin", opt_.tail_margin}};
    return j;
}

MapKernel MapKernel::from_json(const nlohmann::json& j) {
    if (j.value("format", "") != "tractlab-kernel" || j.value("version", 0) != 1)
        throw std::invalid_argument("not a kernel cache file");
    MapKernel k;
    k.spec_.r = j.at("spec").at("r").get<std::vector<double>>();
    k.spec_.R = j.at("spec").at("R").get<std::vector<double>>();
    if (spec_hash(k.spec_) != j.at("spec_hash").get<std::string>()) throw std::invalid_argument("kernel cache: spec hash mismatch");
    const auto& o = j.at("options");
    k.opt_.eps_target = o.at("eps_target").get<double>();
    k.opt_.table_step = o.at("table_step").get<double>();
    k.opt_.tail_margin = o.at("tail_margin").get<double>();
    std::vector<Prevertex> pv;
    for (const auto& n : j.at("nodes"))
        pv.push_back({n.at("lambda").get<double>(), n.at("line").get<int>(), n.at("beta").get<double>(),
                      cplx(n.at("x").get<double>(), n.at("y").get<double>())});
    k.sc_ = StripSC(std::move(pv));
    k.assemble(j.at("quad_tol").get<double>());
    const double a = j.at("normalization").at("scale").get<double>();
    if (std::abs(k.a_ / a - 1.0) > 1e-9) throw std::invalid_argument("kernel cache: normalisation does not reproduce");
    return k;
}

}  // namespace tractlab
