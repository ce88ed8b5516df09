#include "tractlab/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

namespace tractlab {

namespace {

const WiggleSpec kReferenceSpec{{20.0}, {30.0}};

std::string fmt(cplx z) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "%.12g%+.12gi", z.real(), z.imag());
    return buf;
}

std::string fmt(double x) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.12g", x);
    return buf;
}

// Uniform interior sample of the tract with Re z in [4, xmax], kept `gap` away from the boundary.
cplx sample_interior(const WiggleSpec& spec, std::mt19937_64& rng, double xmax, double gap) {
    std::uniform_real_distribution<double> ux(4.0, xmax), uy(-kPi, kPi);
    for (;;) {
        const cplx z(ux(rng), uy(rng));
        if (contains(spec, z) && boundary_distance(spec, z) >= gap) return z;
    }
}

double lambda_ceiling(const ProjectionMap& phi) { return std::min(700.0, phi.linear_from() + 5.0); }

}  // namespace

void CheckResult::observe(double measured, double limit, const std::string& where) {
    ++samples;
    const double s = limit - measured;
    if (s < slack) {
        slack = s;
        worst = measured;
        bound = limit;
        witness = where;
    }
    if (!(s >= 0.0)) pass = false;
}

nlohmann::json CheckResult::to_json() const {
    nlohmann::json j{{"name", name}, {"pass", pass}, {"samples", samples}, {"witness", witness}};
    auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
    j["worst"] = num(worst);
    j["bound"] = num(bound);
    j["slack"] = num(slack);
    if (!extra.empty()) j["extra"] = extra;
    return j;
}

CheckResult check_expansion(const MapKernel& k, int samples, std::uint64_t seed) {
    CheckResult r{"expansion"};
    std::mt19937_64 rng(seed);
    const double xmax = default_xmax(k.spec());
    for (int i = 0; i < samples; ++i) {
        const cplx z = sample_interior(k.spec(), rng, xmax, 1e-3);
        const double log_re = k.forward(z).log_re();
        const double log_d = k.derivative_modulus(z).log_value;
        // (Re F / 2) / |F'| <= 1 / (1 - 1e-4)
        r.observe(std::exp(log_re - std::log(2.0) - log_d), 1.0 / (1.0 - 1e-4), fmt(z));
    }
    return r;
}

CheckResult check_inverse_contraction(const MapKernel& k, int samples, std::uint64_t seed) {
    CheckResult r{"inverse_contraction"};
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> lx(std::log(4.0), std::log(1e4)), uy(-1.0, 1.0), step(-2.0, 2.0);
    for (int i = 0; i < samples; ++i) {
        const double x = std::exp(lx(rng));
        const cplx w1(x, uy(rng) * (x + 10.0));
        cplx w2 = w1 + cplx(step(rng), step(rng)) * std::max(1.0, 0.1 * x);
        if (w2.real() < 4.0) w2 = cplx(4.0 + (4.0 - w2.real()), w2.imag());
        const double d = std::abs(k.inverse(w1) - k.inverse(w2));
        r.observe(d, std::abs(w1 - w2) / 2 + 10 * k.eps_map(), fmt(w1) + " / " + fmt(w2));
    }
    return r;
}

CheckResult check_round_trip(const MapKernel& k, int samples, std::uint64_t seed) {
    CheckResult r{"round_trip"};
    std::mt19937_64 rng(seed);
    const double xmax = default_xmax(k.spec());
    for (int i = 0; i < samples; ++i) {
        const cplx z = sample_interior(k.spec(), rng, xmax, 1e-6);
        r.observe(std::abs(k.inverse(k.forward(z)) - z), 10 * k.eps_map(), fmt(z));
    }
    return r;
}

std::vector<CheckResult> check_phi_properties(const ProjectionMap& phi, int samples, std::uint64_t seed) {
    CheckResult a{"phi_contraction"}, b{"phi_below_identity"}, c{"phi_log_bound"}, d{"phi_simple_bounds"};
    std::mt19937_64 rng(seed);
    const double lmin = std::log(4.0), lmax = lambda_ceiling(phi);
    std::uniform_real_distribution<double> ul(lmin, lmax), near(-0.5, 0.5), coin(0.0, 1.0);
    const double slack = 10 * phi.eps();
    for (int i = 0; i < samples; ++i) {
        const double l = ul(rng);
        const double t = std::exp(l), x = phi.value_log(l);
        const double l2 = coin(rng) < 0.5 ? ul(rng) : std::max(lmin, std::min(lmax, l + near(rng)));
        const double t2 = std::exp(l2), x2 = phi.value_log(l2);
        a.observe(std::abs(x - x2), std::abs(t - t2) / 2 + slack, fmt(t) + " / " + fmt(t2));
        if (t >= 5.0) {
            b.observe(x, t + slack, fmt(t));
            c.observe(x, 5.0 + 2.0 * (l - std::log(5.0)) + slack, fmt(t));
        } else {
            b.observe(x, 6.0 + slack, fmt(t));
        }
        if (t >= 7.0) d.observe(x, t - 1.0 + slack, fmt(t));
        if (t >= 15.0) d.observe(x, t / 2 + slack, fmt(t));
    }
    return {a, b, c, d};
}

CheckResult check_f_and_phi(const ProjectionMap& phi, int samples, std::uint64_t seed) {
    CheckResult r{"f_and_phi"};
    const MapKernel& k = phi.kernel();
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> ul(std::log(4.0), std::min(lambda_ceiling(phi), 300.0)), uy(-1.0, 1.0);
    for (int i = 0; i < samples; ++i) {
        const double l = ul(rng);
        const double x = std::exp(l);
        const cplx z(x, uy(rng) * (x + 2 * kPi));
        const double d = std::abs(k.inverse(LogPolarPoint::from(z)).real() - phi.value_log(l));
        r.observe(d, 6.0 + 10 * phi.eps(), fmt(z));
    }
    return r;
}

CheckResult check_sector(const MapKernel& k, double nu, int samples, std::uint64_t seed) {
    CheckResult r{"sector"};
    const double delta = 2.0 * (nu + std::log(2.0 + 1.5 * kPi));
    std::mt19937_64 rng(seed);
    const double xmax = default_xmax(k.spec());
    const int n = std::max(2, static_cast<int>(std::sqrt(2.0 * samples * 50)));
    std::vector<std::pair<cplx, cplx>> pts;
    // Half the points are uniform in T; the other half are preimages of points
    // near the real axis, where the hypothesis |Im F(z) - Im F(w)| <= 2 pi bites.
    const double lmax = std::min(k.forward(cplx(xmax, 0.0)).lambda, 300.0);
    std::uniform_real_distribution<double> ul(std::log(4.0), lmax), uy(-3 * kPi, 3 * kPi);
    for (int i = 0; i < n; ++i) {
        if (i % 2 == 0) {
            const cplx z = sample_interior(k.spec(), rng, xmax, 1e-6);
            const LogPolarPoint w = k.forward(z);
            if (w.lambda > 700.0) continue;
            pts.emplace_back(z, w.value());
        } else {
            const cplx w(std::exp(ul(rng)), uy(rng));
            pts.emplace_back(k.inverse(w), w);
        }
    }
    std::size_t eligible = 0;
    for (const auto& [z, fz] : pts)
        for (const auto& [w, fw] : pts) {
            if (std::abs(z - w) < delta || std::abs(fz) < std::abs(fw) || std::abs(fw) < 4.0) continue;
            if (std::abs(fz.imag() - fw.imag()) > 2 * kPi) continue;
            ++eligible;
            r.observe(std::abs(fz.imag()) + 2 * kPi, fz.real() * (1 + 1e-9), fmt(z) + " / " + fmt(w));
        }
    r.extra["delta"] = delta;
    r.extra["eligible_pairs"] = eligible;
    return r;
}

CheckResult check_nu_stability(const MapKernel& k) {
    CheckResult r{"nu_stability"};
    const NuEstimate coarse = k.estimate_nu(0.1, 64), fine = k.estimate_nu(0.05, 128);
    r.observe(std::abs(coarse.nu - fine.nu) / fine.nu, 0.01, "lambda " + fmt(fine.argmax_lambda));
    r.extra["nu_coarse"] = coarse.nu;
    r.extra["nu_fine"] = fine.nu;
    if (!std::isfinite(fine.nu)) r.pass = false;
    return r;
}

CheckResult check_un1(const ProjectionMap& phi, double nu0, int intervals, std::uint64_t seed) {
    CheckResult r{"un1"};
    const WiggleSpec& spec = phi.kernel().spec();
    if (spec.size() > 1) throw std::invalid_argument("Un1 check needs at most one wiggle");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    const double lo_gap = spec.empty() ? INFINITY : spec.r[0] - nu0;
    const double hi_gap = spec.empty() ? 6.0 : spec.R[0] + nu0;
    int made = 0;
    for (int tries = 0; made < intervals && tries < 100 * intervals; ++tries) {
        const double len = nu0 * (1.0 + u01(rng));
        double A;
        if (u01(rng) < 0.5 && lo_gap - len >= 6.0) {
            A = 6.0 + u01(rng) * std::min(lo_gap - len - 6.0, 60.0);
        } else {
            A = hi_gap + u01(rng) * 60.0;
        }
        const Quadruple q{A, A + len / 3, A + 2 * len / 3, A + len};
        const auto fam = minimal_covers(phi, q, 1);
        r.observe(std::abs(static_cast<double>(fam.intervals.size()) - 1.0), 0.0, "[" + fmt(q.A) + ", " + fmt(q.D) + "]");
        ++made;
    }
    if (made < intervals) r.pass = false;
    return r;
}

CheckResult check_caratheodory(const ProjectionMap& phi, double eps, double tau, int steps) {
    CheckResult r{"caratheodory"};
    const RhoReport rep = choose_rho(phi, eps, tau, steps, 4.0, false, phi.kernel().options());
    nlohmann::json sups = nlohmann::json::array();
    for (std::size_t i = 0; i < rep.sups.size(); ++i) {
        sups.push_back({rep.sups[i].first, rep.sups[i].second});
        if (i > 0)
            r.observe(rep.sups[i].second, rep.sups[i - 1].second + 10 * phi.eps(), "rho " + fmt(rep.sups[i].first));
    }
    if (!rep.sups.empty()) r.observe(rep.sups.back().second, eps, "final rho " + fmt(rep.sups.back().first));
    r.extra["sups"] = sups;
    r.extra["eps"] = eps;
    r.extra["tau"] = tau;
    return r;
}

CheckResult check_cover_contraction(const MapKernel& k, const Address& s, int depth) {
    CheckResult r{"cover_contraction"};
    nlohmann::json diam = nlohmann::json::array();
    BoxCover prev = continuum_cover(k, s, 0);
    diam.push_back(prev.core_diam_max);
    for (int j = 1; j <= depth; ++j) {
        BoxCover cur = continuum_cover(k, s, j);
        r.observe(cur.core_diam_max, prev.core_diam_max / 2 + 10 * k.eps_map(), "depth " + std::to_string(j));
        diam.push_back(cur.core_diam_max);
        prev = std::move(cur);
    }
    r.extra["core_diam"] = diam;
    return r;
}

CheckResult check_lower_order(const MapKernel& k, int n_guard, double C) {
    CheckResult r{"lower_order"};
    std::vector<double> grid;
    if (k.spec().empty()) {
        for (double x = 30.0; x <= 60.0; x += 2.0) grid.push_back(x);
    } else {
        const double xmax = default_xmax(k.spec());
        for (int i = 0; i <= 40; ++i) grid.push_back(10.0 + (xmax - 10.0) * i / 40.0);
    }
    const auto g = measure_growth(k, grid);
    nlohmann::json slopes = nlohmann::json::array();
    double smin = INFINITY;
    for (const auto& s : g) {
        slopes.push_back({s.r, s.s});
        smin = std::min(smin, s.s);
        r.observe(1.0 / (2.0 * C), s.s, "r " + fmt(s.r));
        if (k.spec().empty()) {
            r.observe(s.s, 0.55, "r " + fmt(s.r));
            r.observe(0.45, s.s, "r " + fmt(s.r));
        }
    }
    if (!k.spec().empty()) r.observe(smin, 0.5 + 1.0 / n_guard + 0.05, "min over grid");
    r.extra["slopes"] = slopes;
    r.extra["s_min"] = smin;
    return r;
}

GrowthReport check_growth(const std::vector<const MapKernel*>& kernels, int samples, std::uint64_t seed) {
    GrowthReport g;
    g.check.name = "growth";
    for (const MapKernel* k : kernels) g.per_spec.push_back(measure_growth_constant(*k, samples, seed).C);
    // report with a 10% margin, then validate on fresh samples
    g.C = 1.1 * *std::max_element(g.per_spec.begin(), g.per_spec.end());
    for (const MapKernel* k : kernels) {
        const GrowthFit fresh = measure_growth_constant(*k, samples, seed + 1000);
        g.check.observe(fresh.C, g.C, spec_hash(k->spec()) + " " + fmt(fresh.worst));
    }
    g.check.extra["C"] = g.C;
    g.check.extra["per_spec"] = g.per_spec;
    return g;
}

bool VerificationReport::pass() const {
    return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.pass; });
}

nlohmann::json VerificationReport::to_json() const {
    nlohmann::json j{{"spec", {{"r", spec.r}, {"R", spec.R}}}, {"eps_map", eps_map}, {"nu0", nu0}, {"pass", pass()}};
    j["checks"] = nlohmann::json::array();
    for (const auto& c : checks) j["checks"].push_back(c.to_json());
    return j;
}

VerificationReport verify_all(const WiggleSpec& spec, const MapOptions& map_opt, const VerifyOptions& opt) {
    VerificationReport rep;
    rep.spec = spec;
    auto k = std::make_shared<MapKernel>(MapKernel::build(spec, map_opt));
    const ProjectionMap phi = ProjectionMap::build(k);
    const MapKernel ref = MapKernel::build(kReferenceSpec, map_opt);
    rep.eps_map = k->eps_map();
    rep.nu0 = std::max(k->estimate_nu().nu, ref.estimate_nu().nu);

    const std::uint64_t s = opt.seed;
    rep.checks.push_back(check_round_trip(*k, opt.samples, s));
    rep.checks.push_back(check_expansion(*k, opt.samples, s + 1));
    rep.checks.push_back(check_inverse_contraction(*k, opt.samples, s + 2));
    for (auto& c : check_phi_properties(phi, opt.samples, s + 3)) rep.checks.push_back(std::move(c));
    rep.checks.push_back(check_f_and_phi(phi, opt.samples, s + 4));
    rep.checks.push_back(check_sector(*k, rep.nu0, opt.samples, s + 5));
    rep.checks.push_back(check_nu_stability(*k));
    if (spec.size() <= 1) rep.checks.push_back(check_un1(phi, rep.nu0, opt.un1_intervals, s + 6));
    rep.checks.push_back(check_caratheodory(phi, opt.rho_eps, opt.tau, opt.rho_steps));
    GrowthReport g = check_growth({k.get(), &ref}, opt.samples, s + 7);
    rep.checks.push_back(g.check);
    rep.checks.push_back(check_lower_order(*k, 4, g.C));
    rep.checks.push_back(check_cover_contraction(*k, Address{}, opt.cover_depth));
    return rep;
}

}  // namespace tractlab
