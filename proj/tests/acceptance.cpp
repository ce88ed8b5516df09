// Acceptance suite: one line per criterion, exit status 0 iff all pass.

#include <algorithm>
#include <chrono>
#include <cstdarg>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "tractlab/builder.hpp"
#include "tractlab/model_dynamics.hpp"
#include "tractlab/verify.hpp"

using namespace tractlab;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

cplx F0(cplx z) { return 5.0 * std::sinh((z - 4.0) / 2.0) / std::sinh(0.5); }

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
    char buf[512];
    va_list ap;
    va_start(ap, f);
    std::vsnprintf(buf, sizeof buf, f, ap);
    va_end(ap);
    return buf;
}

struct Kernels {
    std::vector<WiggleSpec> specs{{}, {{20}, {30}}, {{12, 22}, {18, 28}}};
    std::vector<std::shared_ptr<MapKernel>> k;
    std::vector<ProjectionMap> phi;
    double nu0 = 0.0;

    Kernels() {
        for (const auto& s : specs) {
            k.push_back(std::make_shared<MapKernel>(MapKernel::build(s)));
            phi.push_back(ProjectionMap::build(k.back()));
        }
        for (const auto& kk : k) nu0 = std::max(nu0, kk->estimate_nu().nu);
    }
};

Kernels& kernels() {
    static Kernels K;
    return K;
}

// 40 x 25 grid on {4.5 <= Re z <= 30, |Im z| <= 3}
std::vector<cplx> grid() {
    std::vector<cplx> g;
    for (int i = 0; i < 40; ++i)
        for (int j = 0; j < 25; ++j) g.emplace_back(4.5 + 25.5 * i / 39, -3.0 + 6.0 * j / 24);
    return g;
}

// Grid oracle for crossings of phi^n with x on [lo, hi] (log t).
std::vector<double> grid_roots(const ProjectionMap& phi, double lo, double hi, int n, double x, int cells) {
    std::vector<double> out;
    double a = lo, ga = phi.iterate_log(a, n) - x;
    for (int i = 1; i <= cells; ++i) {
        const double b = lo + (hi - lo) * i / cells, gb = phi.iterate_log(b, n) - x;
        if ((ga < 0) != (gb < 0)) out.push_back(0.5 * (a + b));
        a = b;
        ga = gb;
    }
    return out;
}

bool grid_crooked(const ProjectionMap& phi, double lo, double hi, int n, const Quadruple& q, int cells) {
    std::vector<std::pair<double, char>> marks;
    for (double l : grid_roots(phi, lo, hi, n, q.B, cells)) marks.emplace_back(l, 'B');
    for (double l : grid_roots(phi, lo, hi, n, q.C, cells)) marks.emplace_back(l, 'C');
    std::sort(marks.begin(), marks.end());
    std::string seq;
    for (const auto& m : marks)
        if (seq.empty() || seq.back() != m.second) seq.push_back(m.second);
    return seq.size() >= 3;
}

Outcome combine(const std::vector<CheckResult>& checks) {
    Outcome o{true, ""};
    for (const auto& c : checks) {
        o.pass = o.pass && c.pass;
        o.detail += fmt("%s%s slack %.3g (n=%zu)", o.detail.empty() ? "" : "; ", c.name.c_str(), c.slack, c.samples);
        if (!c.pass) o.detail += " at " + c.witness;
    }
    return o;
}

// ---- criteria -------------------------------------------------------------

Outcome oracle_agreement() {
    const auto t0 = Clock::now();
    const MapKernel k = MapKernel::build({});
    double worst = 0.0;
    for (const cplx z : grid()) worst = std::max(worst, std::abs(k.forward(z).value() / F0(z) - 1.0));
    const double t = seconds_since(t0);
    return {worst <= 1e-6 && t <= 60.0, fmt("max relative error %.2e <= 1e-6 on 1000 points, %.1f s <= 60 s", worst, t)};
}

Outcome round_trip() {
    Outcome o{true, ""};
    for (std::size_t s : {0u, 2u}) {
        const MapKernel& k = *kernels().k[s];
        double worst = 0.0;
        int used = 0;
        for (const cplx z : grid()) {
            if (!contains(k.spec(), z) || boundary_distance(k.spec(), z) < 1e-6) continue;
            ++used;
            worst = std::max(worst, std::abs(k.inverse(k.forward(z)) - z));
        }
        o.pass = o.pass && worst <= 10 * k.eps_map();
        o.detail += fmt("%sN=%zu: %.2e <= %.2e (%d interior grid points)", o.detail.empty() ? "" : "; ", k.spec().size(), worst,
                        10 * k.eps_map(), used);
    }
    return o;
}

Outcome expansion() {
    std::vector<CheckResult> c;
    for (const auto& k : kernels().k) c.push_back(check_expansion(*k, 1000, 31));
    return combine(c);
}

Outcome phi_properties() {
    std::vector<CheckResult> c;
    for (const auto& p : kernels().phi)
        for (auto& r : check_phi_properties(p, 1000, 41)) c.push_back(std::move(r));
    return combine(c);
}

Outcome f_and_phi() {
    std::vector<CheckResult> c;
    for (const auto& p : kernels().phi) c.push_back(check_f_and_phi(p, 1000, 51));
    return combine(c);
}

Outcome bounded_decorations() {
    Outcome o{true, ""};
    for (const auto& k : kernels().k) {
        const CheckResult c = check_nu_stability(*k);
        o.pass = o.pass && c.pass;
        o.detail += fmt("%snu=%.4f (fine %.4f)", o.detail.empty() ? "" : "; ", c.extra["nu_coarse"].get<double>(),
                        c.extra["nu_fine"].get<double>());
    }
    return o;
}

Outcome growth() {
    std::vector<const MapKernel*> ks;
    for (const auto& k : kernels().k) ks.push_back(k.get());
    const GrowthReport g = check_growth(ks, 1000, 61);
    Outcome o = combine({g.check});
    o.detail = fmt("C = %.4f for all specs; ", g.C) + o.detail;
    return o;
}

Outcome un1() {
    std::vector<CheckResult> c;
    for (const WiggleSpec& s : {WiggleSpec{{20}, {30}}, WiggleSpec{{40}, {55}}}) {
        auto k = std::make_shared<MapKernel>(MapKernel::build(s));
        const ProjectionMap phi = ProjectionMap::build(k);
        c.push_back(check_un1(phi, kernels().nu0, 20, 71));
    }
    return combine(c);
}

Outcome crookedness_creation() {
    const double nu0 = kernels().nu0;
    const ProjectionMap& phi0 = kernels().phi[0];
    const Quadruple q{10, 11, 12, 13};
    const Quadruple s0 = shrink(q, q.size() / 8);
    const PlaceReport p = place_wiggle(phi0, s0, nu0, 0.0);
    if (!p.placed) return {false, "placement failed: " + p.message};
    // the sinh model gives the targeted interval in closed form
    const Quadruple expect{F0(s0.A).real(), F0(s0.B).real(), F0(s0.C).real(), F0(s0.D).real()};
    const double qerr = std::max({std::abs(p.q_hat.A / expect.A - 1), std::abs(p.q_hat.B / expect.B - 1),
                                  std::abs(p.q_hat.C / expect.C - 1), std::abs(p.q_hat.D / expect.D - 1)});
    auto k = std::make_shared<MapKernel>(MapKernel::build(p.spec));
    const ProjectionMap phi = ProjectionMap::build(k);
    const IntervalFamily f = minimal_covers(phi, p.q_hat, 1);
    bool ok = qerr < 1e-8 && !f.intervals.empty();
    double margin = INFINITY;
    std::size_t agree = 0;
    for (const auto& J : f.intervals) {
        ok = ok && J.crooked() && J.witness->margin > 10;
        if (J.witness) margin = std::min(margin, J.witness->margin);
        const bool oracle = grid_crooked(phi, J.lo, J.hi, 1, p.q_hat, 200000);
        if (oracle == J.crooked()) ++agree;
    }
    ok = ok && agree == f.intervals.size();
    return {ok, fmt("wiggle (%.4f, %.4f); Q^ rel. err vs closed form %.1e; %zu/%zu intervals crooked, min margin %.3g > 10; grid oracle "
                    "agrees on %zu/%zu",
                    p.spec.r[0], p.spec.R[0], qerr, f.crooked_count(), f.intervals.size(), margin, agree, f.intervals.size())};
}

Outcome caratheodory() {
    const CheckResult c = check_caratheodory(kernels().phi[0], 1e-3, 20.0, 4);
    std::string sups;
    for (const auto& s : c.extra["sups"]) sups += fmt("%s%.0f:%.2e", sups.empty() ? "" : " ", s[0].get<double>(), s[1].get<double>());
    return {c.pass, "rho:sup " + sups + fmt("; non-increasing, final <= 1e-3 (slack %.2e)", c.slack)};
}

WiggleSpec g_staged;

Outcome end_to_end() {
    const auto t0 = Clock::now();
    BuildState state;
    BuildConfig cfg;  // K = 1, guard n = 4, nu0 and C measured
    const Quadruple q{9 + cfg.K, 9 + 2 * cfg.K, 9 + 3 * cfg.K, 9 + 4 * cfg.K};
    const StageReport rep = run_stage(state, q, cfg);
    if (!rep.ok) return {false, "stage failed: " + rep.message};
    g_staged = state.spec;
    MapOptions half;
    half.eps_target = cfg.map.eps_target / 2;
    Certificate fresh;
    const bool same = reverify(*rep.certificate, state.spec, half, &fresh);
    const double t = seconds_since(t0);
    const bool ok = same && state.spec.size() == 1 && rep.certificate->family.all_crooked() && t <= 1800;
    return {ok, fmt("N=%zu, wiggle (%.4f, %.4f), n*=%d, %zu/%zu crooked, persists=%d; rerun at eps/2 identical=%d; %.1f s <= 1800 s",
                    state.spec.size(), state.spec.r[0], state.spec.R[0], rep.certificate->n_star,
                    rep.certificate->family.crooked_count(), rep.certificate->total, rep.certificate->persists, same, t)};
}

Outcome lower_order() {
    const GuardParams g = measure_guard({}, BuildConfig{});
    const CheckResult a = check_lower_order(*kernels().k[0], 4, g.C);
    if (g_staged.empty()) return {false, "no staged spec (criterion 11 failed)"};
    const MapKernel staged = MapKernel::build(g_staged);
    const CheckResult b = check_lower_order(staged, 4, g.C);
    Outcome o{a.pass && b.pass, ""};
    o.detail = fmt("N=0: s(r) in [0.45,0.55] for r>=30 (min %.4f); staged: min s %.4f <= 0.80; s >= 1/(2C)=%.4f",
                   a.extra["s_min"].get<double>(), b.extra["s_min"].get<double>(), 1 / (2 * g.C));
    return o;
}

Outcome separation() {
    Outcome o{true, ""};
    for (std::size_t s : {0u, 1u}) {
        const CheckResult c = check_cover_contraction(*kernels().k[s], Address{}, 20);
        o.pass = o.pass && c.pass;
        o.detail += fmt("%sN=%zu: 20 depths, slack %.2e", o.detail.empty() ? "" : "; ", kernels().specs[s].size(), c.slack);
    }
    const Window w = Window::parse("4,12,-4,4,320,160");
    std::vector<BoxCover> a, b;
    for (int d = 0; d <= 8; ++d) a.push_back(continuum_cover(*kernels().k[1], Address{}, d));
    for (int d = 0; d <= 8; ++d) b.push_back(continuum_cover(*kernels().k[1], Address{}, d));
    const bool same = render(a, w) == render(b, w);
    o.pass = o.pass && same;
    o.detail += fmt("; renders byte-identical=%d", same);
    return o;
}

Outcome negative_control() {
    const ProjectionMap& phi = kernels().phi[0];
    std::vector<Quadruple> qs = quadruple_schedule(1, 16);
    for (const Quadruple& q : {Quadruple{9.5, 13.25, 20, 31.7}, Quadruple{40, 41, 42, 43}, Quadruple{6, 7, 8, 9}}) qs.push_back(q);
    std::size_t witnesses = 0, families = 0;
    for (const auto& q : qs)
        for (const auto& f : cover_levels(phi, q, 8)) {
            ++families;
            witnesses += f.crooked_count();
        }
    return {witnesses == 0, fmt("%zu witnesses over %zu quadruples x n=0..8 (%zu families)", witnesses, qs.size(), families)};
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"oracle agreement (N=0)", oracle_agreement},
        {"round trip", round_trip},
        {"expansion", expansion},
        {"projection properties (a)-(d)", phi_properties},
        {"F and phi", f_and_phi},
        {"bounded decorations", bounded_decorations},
        {"growth", growth},
        {"U_1 of admissible intervals", un1},
        {"crookedness creation", crookedness_creation},
        {"approximation by close functions", caratheodory},
        {"end-to-end stage", end_to_end},
        {"lower order", lower_order},
        {"separation (backward covers)", separation},
        {"negative control", negative_control},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        const auto t0 = Clock::now();
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        if (!o.pass) ++failed;
        std::printf("criterion %2zu %s  %s: %s [%.1f s]\n", i + 1, o.pass ? "PASS" : "FAIL", criteria[i].first.c_str(),
                    o.detail.c_str(), seconds_since(t0));
        std::fflush(stdout);
    }
    std::printf("%zu/%zu criteria passed\n", criteria.size() - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
