#include "tractlab/builder.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

namespace tractlab {

namespace {

// Wiggles past this abscissa are out of reach of the kernel's double arithmetic.
constexpr double kDeskScale = 1e5;

const WiggleSpec kReferenceSpec{{20.0}, {30.0}};

nlohmann::json quad_json(const Quadruple& q) { return {q.A, q.B, q.C, q.D}; }
Quadruple quad_from(const nlohmann::json& j) { return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>(), j.at(3).get<double>()}; }

std::size_t non_crooked(const IntervalFamily& f) { return f.intervals.size() - f.crooked_count(); }

}  // namespace

nlohmann::json BuildConfig::to_json() const {
    nlohmann::json j{{"K", K},          {"n_guard", n_guard},   {"stages", stages},         {"cap", cap},
                     {"max_wiggles", max_wiggles}, {"tau", tau}, {"rho_eps", rho_eps}, {"rho_steps", rho_steps},
                     {"probe_width", probe_width}, {"n_max", n_max}, {"eps_target", map.eps_target}};
    j["nu0"] = nu0 ? nlohmann::json(*nu0) : nlohmann::json(nullptr);
    j["growth_C"] = growth_C ? nlohmann::json(*growth_C) : nlohmann::json(nullptr);
    return j;
}

BuildConfig BuildConfig::from_json(const nlohmann::json& j) {
    BuildConfig c;
    c.K = j.value("K", c.K);
    c.n_guard = j.value("n_guard", c.n_guard);
    c.stages = j.value("stages", c.stages);
    c.cap = j.value("cap", c.cap);
    c.max_wiggles = j.value("max_wiggles", c.max_wiggles);
    c.tau = j.value("tau", c.tau);
    c.rho_eps = j.value("rho_eps", c.rho_eps);
    c.rho_steps = j.value("rho_steps", c.rho_steps);
    c.probe_width = j.value("probe_width", c.probe_width);
    c.n_max = j.value("n_max", c.n_max);
    c.map.eps_target = j.value("eps_target", c.map.eps_target);
    if (j.contains("nu0") && !j["nu0"].is_null()) c.nu0 = j["nu0"].get<double>();
    if (j.contains("growth_C") && !j["growth_C"].is_null()) c.growth_C = j["growth_C"].get<double>();
    return c;
}

// ---- certificates ---------------------------------------------------------

nlohmann::json Certificate::canonical() const {
    return {{"Q", quad_json(q)}, {"n_star", n_star}, {"total", total}, {"crooked", crooked}, {"persists", persists}};
}

nlohmann::json Certificate::to_json() const {
    nlohmann::json j = canonical();
    j["min_margin"] = std::isfinite(min_margin) ? nlohmann::json(min_margin) : nlohmann::json(nullptr);
    j["kernel"] = kernel_fingerprint;
    j["eps_map"] = eps_map;
    j["family"] = family.to_json();
    return j;
}

Certificate Certificate::from_json(const nlohmann::json& j) {
    Certificate c;
    c.q = quad_from(j.at("Q"));
    c.n_star = j.at("n_star").get<int>();
    c.total = j.at("total").get<std::size_t>();
    c.crooked = j.at("crooked").get<std::vector<bool>>();
    c.persists = j.at("persists").get<bool>();
    if (j.contains("min_margin") && !j["min_margin"].is_null()) c.min_margin = j["min_margin"].get<double>();
    c.kernel_fingerprint = j.value("kernel", std::string{});
    c.eps_map = j.value("eps_map", 0.0);
    c.family.q = c.q;
    c.family.n = c.n_star;
    return c;
}

std::optional<Certificate> certify(const ProjectionMap& phi, const Quadruple& q, int n_max) {
    const HypothesisResult h = hypothesis_check(phi, q, 0, n_max);
    if (!h.ok) return std::nullopt;
    Certificate c;
    c.q = q;
    c.n_star = h.n_star;
    c.total = h.family.intervals.size();
    for (const auto& iv : h.family.intervals) c.crooked.push_back(iv.crooked());
    c.persists = h.persists;
    c.min_margin = h.min_margin;
    c.kernel_fingerprint = phi.kernel().fingerprint();
    c.eps_map = phi.kernel().eps_map();
    c.family = h.family;
    return c;
}

bool reverify(const Certificate& cert, const WiggleSpec& spec, const MapOptions& opt, Certificate* fresh) {
    auto k = std::make_shared<MapKernel>(MapKernel::build(spec, opt));
    const ProjectionMap phi = ProjectionMap::build(k);
    const auto c = certify(phi, cert.q, std::max(cert.n_star, 0) + 2);
    if (!c) return false;
    if (fresh) *fresh = *c;
    return c->canonical().dump() == cert.canonical().dump();
}

nlohmann::json BuildState::to_json() const {
    nlohmann::json j;
    j["spec"] = {{"r", spec.r}, {"R", spec.R}};
    j["certificates"] = nlohmann::json::array();
    for (const auto& c : certificates) j["certificates"].push_back(c.to_json());
    j["rho_history"] = rho_history;
    j["schedule_pos"] = schedule_pos;
    j["guard"] = {{"n_guard", guard.n_guard}, {"C", guard.C}, {"nu0", guard.nu0}};
    return j;
}

BuildState BuildState::from_json(const nlohmann::json& j) {
    BuildState s;
    s.spec.r = j.at("spec").at("r").get<std::vector<double>>();
    s.spec.R = j.at("spec").at("R").get<std::vector<double>>();
    for (const auto& c : j.at("certificates")) s.certificates.push_back(Certificate::from_json(c));
    s.rho_history = j.at("rho_history").get<std::vector<double>>();
    s.schedule_pos = j.at("schedule_pos").get<std::size_t>();
    s.guard.n_guard = j.at("guard").at("n_guard").get<int>();
    s.guard.C = j.at("guard").at("C").get<double>();
    s.guard.nu0 = j.at("guard").at("nu0").get<double>();
    return s;
}

// ---- schedule and placement -----------------------------------------------

std::vector<Quadruple> quadruple_schedule(double K, double cap) {
    std::vector<Quadruple> out;
    const int k = static_cast<int>(std::ceil(K));
    const int a0 = std::max(9, static_cast<int>(std::ceil(5.0 + K)));
    const int top = static_cast<int>(std::floor(cap));
    for (int D = a0 + 3 * k; D <= top; ++D)
        for (int A = a0; A + 3 * k <= D; ++A)
            for (int B = A + k; B + 2 * k <= D; ++B)
                for (int C = B + k; C + k <= D; ++C) {
                    const Quadruple q{double(A), double(B), double(C), double(D)};
                    if (q.size() >= K) out.push_back(q);
                }
    // generated in (D, A, B, C) order already
    return out;
}

Quadruple shrink(const Quadruple& q, double d) { return {q.A + d, q.B - d, q.C + d, q.D - d}; }

PlaceReport place_wiggle(const ProjectionMap& phi, const Quadruple& q, double nu0, double rho_required, int n1_max) {
    PlaceReport rep;
    const WiggleSpec& spec = phi.kernel().spec();
    rep.spec = spec;
    const int n0 = stabilize_n0(phi, q, nu0);
    const double left = spec.right_of(static_cast<long>(spec.size()) - 1);
    for (int n1 = std::max(n0, 1); n1 <= n1_max; ++n1) {
        const IntervalFamily fam = minimal_covers(phi, q, n1);
        rep.n1 = n1;
        rep.non_crooked = non_crooked(fam);
        if (rep.non_crooked == 0) {
            rep.message = "m = 0: every minimal interval is already crooked";
            return rep;
        }
        const CoverInterval* J = nullptr;
        for (const auto& iv : fam.intervals)
            if (!iv.crooked() && (!J || iv.symbolic() || iv.lo > J->lo)) J = &iv;
        if (J->symbolic() || J->hi > std::log(kDeskScale)) {
            rep.message = "right-most non-crooked interval lies beyond desk scale";
            return rep;
        }
        // Cheapest wiggle: the closest B/C preimage pair inside J.
        double best = INFINITY, b_hat = 0, c_hat = 0;
        for (const Root& b : J->b_points)
            for (const Root& c : J->c_points) {
                const double tb = std::exp(b.lambda), tc = std::exp(c.lambda);
                if (std::abs(tc - tb) < best) {
                    best = std::abs(tc - tb);
                    b_hat = std::min(tb, tc);
                    c_hat = std::max(tb, tc);
                }
            }
        const double a_hat = std::exp(J->lo), d_hat = std::exp(J->hi);
        rep.q_hat = {a_hat, b_hat, c_hat, d_hat};
        rep.spread = std::min(b_hat - a_hat, d_hat - c_hat);
        const double r = b_hat - nu0, R = c_hat + nu0;
        if (rep.spread <= 2 * nu0 + 2 || r < rho_required || r <= left + 1 || R <= r + 2) continue;
        rep.spec.r.push_back(r);
        rep.spec.R.push_back(R);
        const SpecCheck chk = validate_spec(rep.spec);
        if (!chk.ok) throw std::logic_error("placed wiggle violates " + chk.violation);
        rep.placed = true;
        char buf[160];
        std::snprintf(buf, sizeof buf, "wiggle (%.6f, %.6f) over U_%d interval [%.6f, %.6f]", r, R, n1, a_hat, d_hat);
        rep.message = buf;
        return rep;
    }
    char buf[160];
    std::snprintf(buf, sizeof buf, "spread %.3f or rho %.3f not met up to n1 = %d", rep.spread, rho_required, n1_max);
    rep.message = buf;
    return rep;
}

double rho_probe_sup(const ProjectionMap& phi, const ProjectionMap& probe, double tau, double t_max) {
    double sup = 0.0;
    const int grid = 400;
    for (int i = 0; i < grid; ++i) {
        const double t = 4.0 + (t_max - 4.0) * i / (grid - 1);
        double x = t, y = t;
        for (int n = 0; n < 40; ++n) {
            if (std::min(x, y) <= tau) sup = std::max(sup, std::abs(x - y));
            const double xn = phi(x), yn = probe(y);
            if (std::abs(xn - x) < 1e-14 && std::abs(yn - y) < 1e-14) break;
            x = xn;
            y = yn;
        }
    }
    return sup;
}

RhoReport choose_rho(const ProjectionMap& phi, double eps, double tau, int steps, double probe_width, bool stop_early,
                     const MapOptions& opt) {
    RhoReport rep;
    const WiggleSpec& spec = phi.kernel().spec();
    double rho = spec.right_of(static_cast<long>(spec.size()) - 1) + 2.0;
    for (int i = 0; i < steps; ++i, rho *= 2) {
        WiggleSpec probe_spec = spec;
        probe_spec.r.push_back(rho);
        probe_spec.R.push_back(rho + probe_width);
        auto k = std::make_shared<MapKernel>(MapKernel::build(probe_spec, opt));
        const ProjectionMap probe = ProjectionMap::build(k);
        const double sup = rho_probe_sup(phi, probe, tau, 2 * (rho + probe_width));
        rep.sups.emplace_back(rho, sup);
        rep.rho = rho;
        rep.achieved = sup <= eps;
        if (rep.achieved && stop_early) break;
    }
    return rep;
}

double lower_order_guard(const WiggleSpec& spec, const GuardParams& g) {
    const double R_prev = spec.right_of(static_cast<long>(spec.size()) - 1);
    return g.n_guard * (g.nu0 / 2 + g.C * (R_prev + 1)) + g.nu0;
}

std::vector<GrowthSample> measure_growth(const MapKernel& k, const std::vector<double>& r_grid, int y_samples) {
    std::vector<GrowthSample> out;
    for (double r : r_grid) {
        double best = -INFINITY;
        for (int i = 1; i < y_samples; ++i) {
            const cplx z(r, -kPi + 2 * kPi * i / y_samples);
            if (!contains(k.spec(), z) || boundary_distance(k.spec(), z) < 1e-9) continue;
            best = std::max(best, k.forward(z).log_re());
        }
        out.push_back({r, best / r});
    }
    return out;
}

GrowthFit measure_growth_constant(const MapKernel& k, int samples, std::uint64_t seed) {
    const WiggleSpec& spec = k.spec();
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> ux(4.0, default_xmax(spec)), uy(-kPi, kPi);
    GrowthFit fit;
    fit.C = 1.0;
    while (fit.samples < static_cast<std::size_t>(samples)) {
        const cplx z(ux(rng), uy(rng));
        if (!contains(spec, z) || boundary_distance(spec, z) < 1e-9) continue;
        const double lam = k.forward(z).lambda;
        if (lam < std::log(4.0)) continue;
        ++fit.samples;
        long j = -1;
        const double ref = in_wiggle_region(spec, z, &j) ? spec.R[static_cast<std::size_t>(j)] : z.real();
        const double c = std::max(ref / lam, lam / ref);
        if (c > fit.C) {
            fit.C = c;
            fit.worst = z;
        }
    }
    return fit;
}

GuardParams measure_guard(const WiggleSpec& spec, const BuildConfig& cfg) {
    GuardParams g;
    g.n_guard = cfg.n_guard;
    if (cfg.nu0 && cfg.growth_C) {
        g.nu0 = *cfg.nu0;
        g.C = *cfg.growth_C;
        return g;
    }
    for (const WiggleSpec& s : {spec, kReferenceSpec}) {
        const MapKernel k = MapKernel::build(s, cfg.map);
        g.nu0 = std::max(g.nu0, k.estimate_nu().nu);
        g.C = std::max(g.C, measure_growth_constant(k).C);
    }
    if (cfg.nu0) g.nu0 = *cfg.nu0;
    if (cfg.growth_C) g.C = *cfg.growth_C;
    return g;
}

// ---- stages ---------------------------------------------------------------

StageReport run_stage(BuildState& state, const Quadruple& q, const BuildConfig& cfg) {
    StageReport rep;
    rep.q = q;
    if (!q.valid()) throw std::invalid_argument("stage quadruple must be increasing with entries >= 9");
    if (state.guard.nu0 <= 0.0) state.guard = measure_guard(state.spec, cfg);
    const double nu0 = state.guard.nu0;

    auto kernel = std::make_shared<MapKernel>(MapKernel::build(state.spec, cfg.map));
    auto phi = std::make_shared<ProjectionMap>(ProjectionMap::build(kernel));
    if (auto c = certify(*phi, q, cfg.n_max)) {
        rep.ok = true;
        rep.certificate = c;
        rep.message = "already certified; no wiggle needed";
        state.certificates.push_back(*c);
        return rep;
    }

    const int n0 = stabilize_n0(*phi, q, nu0);
    rep.m = non_crooked(minimal_covers(*phi, q, n0));
    const std::size_t m = rep.m;
    const double delta = q.size() / (4.0 * static_cast<double>(m + 1));
    std::vector<Quadruple> chain;
    for (std::size_t j = 0; j <= m; ++j) chain.push_back(shrink(q, static_cast<double>(m - j) * delta));

    std::size_t prev = m;
    for (std::size_t j = 0; j < m; ++j) {
        if (static_cast<int>(state.spec.size()) >= cfg.max_wiggles) {
            rep.message = "stage cap: refusing more than max_wiggles wiggles";
            return rep;
        }
        const double eps = cfg.rho_eps > 0 ? cfg.rho_eps : quadruple_distance(chain[j], chain[j + 1]);
        RhoReport rr = choose_rho(*phi, eps, cfg.tau, cfg.rho_steps, cfg.probe_width, true, cfg.map);
        const double rho_req = std::max(rr.rho, lower_order_guard(state.spec, state.guard));
        rep.rho.push_back(rr);
        PlaceReport pr = place_wiggle(*phi, chain[j], nu0, rho_req, cfg.n_max);
        rep.placements.push_back(pr);
        if (!pr.placed) {
            if (pr.non_crooked == 0) break;
            rep.message = "placement failed: " + pr.message;
            return rep;
        }
        state.spec = pr.spec;
        state.rho_history.push_back(rho_req);
        kernel = std::make_shared<MapKernel>(MapKernel::build(state.spec, cfg.map));
        phi = std::make_shared<ProjectionMap>(ProjectionMap::build(kernel));

        const HypothesisResult h = hypothesis_check(*phi, chain[j + 1], 0, cfg.n_max);
        const std::size_t now = h.ok ? 0 : h.counts.back().second - h.counts.back().first;
        rep.m_trace.push_back(now);
        if (now >= prev) {
            rep.message = "non-crooked count failed to decrease (resolution or rho too small)";
            return rep;
        }
        prev = now;
        if (now == 0) break;
    }

    auto c = certify(*phi, q, cfg.n_max);
    if (!c) {
        rep.message = "no certificate for the stage quadruple";
        return rep;
    }
    rep.ok = true;
    rep.certificate = c;
    state.certificates.push_back(*c);
    rep.message = "certified";
    return rep;
}

}  // namespace tractlab
