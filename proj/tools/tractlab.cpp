// tractlab: command-line front end for the tract / projection / builder library.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "tractlab/builder.hpp"
#include "tractlab/model_dynamics.hpp"
#include "tractlab/verify.hpp"

namespace fs = std::filesystem;
using namespace tractlab;
using nlohmann::json;

namespace {

enum Exit : int { kOk = 0, kUsage = 1, kIO = 2, kResolution = 3, kTangency = 4, kGuard = 5, kCheckFailed = 6 };

struct IOError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct GuardError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Everything a run depends on; written next to the outputs so a run can be replayed.
struct Config {
    std::string out_dir = "out";
    std::string spec_text;
    std::string spec_file;
    MapOptions map;
    double xmax = 0.0;  // 0 = default truncation
    BuildConfig build;
    VerifyOptions verify;
    std::string address = ";0";
    int depth = 8;
    std::string window = "4,12,-4,4,640,320";

    json to_json(const WiggleSpec& spec) const {
        return {{"spec", {{"r", spec.r}, {"R", spec.R}}},
                {"map", {{"eps_target", map.eps_target}, {"table_step", map.table_step}, {"tail_margin", map.tail_margin}}},
                {"xmax", xmax},
                {"build", build.to_json()},
                {"verify",
                 {{"samples", verify.samples}, {"seed", verify.seed}, {"tau", verify.tau}, {"rho_eps", verify.rho_eps},
                  {"rho_steps", verify.rho_steps}, {"cover_depth", verify.cover_depth}}},
                {"address", address},
                {"depth", depth},
                {"window", window}};
    }
};

json spec_json(const WiggleSpec& s) { return {{"r", s.r}, {"R", s.R}}; }

WiggleSpec parse_spec(const std::string& text) {
    WiggleSpec s;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        const auto colon = item.find(':');
        if (colon == std::string::npos) throw CLI::ValidationError("--spec", "expected r:R pairs, got '" + item + "'");
        s.r.push_back(std::stod(item.substr(0, colon)));
        s.R.push_back(std::stod(item.substr(colon + 1)));
    }
    return s;
}

json read_json(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IOError("cannot read " + path);
    try {
        return json::parse(f);
    } catch (const json::exception& e) {
        throw IOError(path + ": " + e.what());
    }
}

WiggleSpec load_spec(const Config& c) {
    WiggleSpec s;
    if (!c.spec_file.empty()) {
        json j = read_json(c.spec_file);
        if (j.contains("spec")) j = j["spec"];
        s.r = j.at("r").get<std::vector<double>>();
        s.R = j.at("R").get<std::vector<double>>();
    } else if (!c.spec_text.empty()) {
        s = parse_spec(c.spec_text);
    }
    const SpecCheck chk = validate_spec(s);
    if (!chk.ok) throw GuardError("invalid spec: " + chk.violation);
    return s;
}

Quadruple parse_quad(const std::string& text) {
    std::vector<double> v;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) v.push_back(std::stod(item));
    if (v.size() != 4) throw CLI::ValidationError("--quad", "expected A,B,C,D");
    return {v[0], v[1], v[2], v[3]};
}

cplx parse_point(const std::string& text) {
    const auto comma = text.find(',');
    if (comma == std::string::npos) return {std::stod(text), 0.0};
    return {std::stod(text.substr(0, comma)), std::stod(text.substr(comma + 1))};
}

fs::path out_path(const Config& c, const std::string& name) {
    fs::create_directories(c.out_dir);
    return fs::path(c.out_dir) / name;
}

void write_text(const fs::path& p, const std::string& text) {
    std::ofstream f(p, std::ios::binary);
    if (!f) throw IOError("cannot write " + p.string());
    f << text;
    if (!f) throw IOError("write failed: " + p.string());
}

void write_json(const fs::path& p, const json& j) { write_text(p, j.dump(2) + "\n"); }

std::shared_ptr<MapKernel> make_kernel(const Config& c, const WiggleSpec& s) {
    return std::make_shared<MapKernel>(MapKernel::build(s, c.map));
}

std::string fmt(double x) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.15g", x);
    return buf;
}

// ---- subcommands ----------------------------------------------------------

int tract_cmd(const Config& c, const std::string& action) {
    const WiggleSpec s = load_spec(c);
    const double xmax = c.xmax > 0 ? c.xmax : default_xmax(s);
    const TractBoundary b = build_boundary(s, xmax);
    if (action == "validate") {
        std::cout << "spec ok: N = " << s.size() << "\n";
        return kOk;
    }
    if (action == "build") {
        json j{{"spec", spec_json(s)}, {"xmax", xmax}};
        auto chain = [](const std::vector<Corner>& cs) {
            json a = json::array();
            for (const auto& k : cs) a.push_back({{"x", k.z.real()}, {"y", k.z.imag()}, {"turn", k.turn}, {"tip", k.tip}});
            return a;
        };
        j["upper"] = chain(b.upper);
        j["lower"] = chain(b.lower);
        j["slits"] = json::array();
        for (const auto& sl : b.slits) j["slits"].push_back({sl.a.real(), sl.a.imag(), sl.b.real(), sl.b.imag()});
        j["tips"] = json::array();
        for (const auto& t : b.tips) j["tips"].push_back({t.real(), t.imag()});
        write_json(out_path(c, "tract.json"), j);
        std::cout << "wrote " << out_path(c, "tract.json").string() << "\n";
        return kOk;
    }
    // plot: membership raster over [4, xmax] x [-pi, pi]
    Window w = Window::parse(c.window);
    w.x0 = 4.0 - 0.5;
    w.x1 = xmax;
    w.y0 = -kPi - 0.5;
    w.y1 = kPi + 0.5;
    BoxCover cells;
    const double dx = (w.x1 - w.x0) / w.width, dy = (w.y1 - w.y0) / w.height;
    for (int j = 0; j < w.height; ++j)
        for (int i = 0; i < w.width; ++i) {
            const cplx z(w.x0 + (i + 0.5) * dx, w.y1 - (j + 0.5) * dy);
            if (contains(s, z)) cells.boxes.push_back({z.real() - dx / 4, z.real() + dx / 4, z.imag() - dy / 4, z.imag() + dy / 4, 0});
        }
    write_file(out_path(c, "tract.ppm").string(), render({cells}, w));
    std::ostringstream csv;
    csv << "chain,x,y\n";
    for (const auto& k : b.upper) csv << "upper," << fmt(k.z.real()) << "," << fmt(k.z.imag()) << "\n";
    for (const auto& k : b.lower) csv << "lower," << fmt(k.z.real()) << "," << fmt(k.z.imag()) << "\n";
    write_text(out_path(c, "tract_boundary.csv"), csv.str());
    std::cout << "wrote tract.ppm, tract_boundary.csv\n";
    return kOk;
}

int map_cmd(const Config& c, const std::string& action, const std::string& z_text, const std::string& w_text) {
    const WiggleSpec s = load_spec(c);
    auto k = make_kernel(c, s);
    if (action == "build") {
        write_json(out_path(c, "kernel.json"), k->to_json());
        std::cout << "kernel " << k->fingerprint() << " eps_map " << k->eps_map() << "\n";
        return kOk;
    }
    if (action == "eval") {
        json j{{"spec", spec_json(s)}, {"eps_map", k->eps_map()}};
        if (!z_text.empty()) {
            const cplx z = parse_point(z_text);
            const LogPolarPoint w = k->forward(z);
            j["z"] = {z.real(), z.imag()};
            j["F"] = {{"lambda", w.lambda}, {"theta", w.theta}};
            if (w.lambda < 700) j["F"]["value"] = {w.value().real(), w.value().imag()};
        }
        if (!w_text.empty()) {
            const cplx w = parse_point(w_text);
            const cplx z = k->inverse(w);
            j["w"] = {w.real(), w.imag()};
            j["F_inv"] = {z.real(), z.imag()};
        }
        std::cout << j.dump(2) << "\n";
        return kOk;
    }
    // selftest
    VerificationReport rep;
    rep.spec = s;
    rep.eps_map = k->eps_map();
    rep.checks.push_back(check_round_trip(*k, c.verify.samples, c.verify.seed));
    rep.checks.push_back(check_expansion(*k, c.verify.samples, c.verify.seed + 1));
    rep.checks.push_back(check_inverse_contraction(*k, c.verify.samples, c.verify.seed + 2));
    for (const auto& ch : rep.checks) std::cout << (ch.pass ? "PASS " : "FAIL ") << ch.name << " slack " << ch.slack << "\n";
    write_json(out_path(c, "map_selftest.json"), rep.to_json());
    return rep.pass() ? kOk : kCheckFailed;
}

int phi_cmd(const Config& c, const std::string& action, double lo, double hi, int n) {
    const WiggleSpec s = load_spec(c);
    const ProjectionMap phi = ProjectionMap::build(make_kernel(c, s));
    if (action == "pieces") {
        json j{{"spec", spec_json(s)}, {"eps_phi", phi.eps()}, {"linear_from", phi.linear_from()},
               {"tail_offset", phi.tail_offset()}, {"monotone_above", phi.monotone_above()}};
        j["pieces"] = json::array();
        for (const auto& p : phi.pieces())
            j["pieces"].push_back({{"lo", p.lo}, {"hi", std::isfinite(p.hi) ? json(p.hi) : json(nullptr)}, {"dir", p.dir}});
        j["turning_points"] = phi.turning_points();
        j["turning_values"] = phi.turning_values();
        write_json(out_path(c, "phi_pieces.json"), j);
        std::cout << j.dump(2) << "\n";
        return kOk;
    }
    std::ostringstream csv;
    csv << "log_t,t,phi,err\n";
    for (const auto& row : phi.sample(std::log(lo), std::log(hi), n))
        csv << fmt(row[0]) << "," << fmt(row[1]) << "," << fmt(row[2]) << "," << fmt(row[3]) << "\n";
    write_text(out_path(c, "phi_sample.csv"), csv.str());
    std::cout << "wrote " << out_path(c, "phi_sample.csv").string() << "\n";
    return kOk;
}

int un_cmd(const Config& c, const Quadruple& q, int n) {
    const WiggleSpec s = load_spec(c);
    const ProjectionMap phi = ProjectionMap::build(make_kernel(c, s));
    const auto levels = cover_levels(phi, q, n);
    json j = json::array();
    for (const auto& f : levels) {
        j.push_back(f.to_json());
        std::cout << "n=" << f.n << " #U=" << f.intervals.size() << " crooked " << f.crooked_count() << "\n";
    }
    write_json(out_path(c, "un.json"), {{"spec", spec_json(s)}, {"levels", j}});
    return kOk;
}

int crooked_cmd(const Config& c, const Quadruple& q, int n) {
    const WiggleSpec s = load_spec(c);
    const ProjectionMap phi = ProjectionMap::build(make_kernel(c, s));
    const IntervalFamily f = minimal_covers(phi, q, n);
    std::cout << f.crooked_count() << " of " << f.intervals.size() << " crooked\n";
    const HypothesisResult h = hypothesis_check(phi, q, 0, std::max(n, c.build.n_max));
    json j{{"spec", spec_json(s)}, {"n", n}, {"family", f.to_json()}, {"hypothesis", {{"ok", h.ok}, {"n_star", h.n_star}, {"persists", h.persists}, {"message", h.message}}}};
    j["hypothesis"]["counts"] = json::array();
    for (const auto& [k, m] : h.counts) j["hypothesis"]["counts"].push_back({k, m});
    write_json(out_path(c, "crooked.json"), j);
    return kOk;
}

int build_cmd(const Config& c, const std::string& quad_text) {
    BuildState state;
    state.spec = load_spec(c);
    const BuildConfig& cfg = c.build;
    // Stage targets: the first stage's quadruple, then the integer schedule.
    std::vector<Quadruple> targets;
    const double K = cfg.K;
    targets.push_back(quad_text.empty() ? Quadruple{9 + K, 9 + 2 * K, 9 + 3 * K, 9 + 4 * K} : parse_quad(quad_text));
    for (const auto& q : quadruple_schedule(K, cfg.cap))
        if (!(q == targets.front())) targets.push_back(q);

    json stages = json::array();
    int status = kOk;
    for (int st = 0; st < cfg.stages && state.schedule_pos < targets.size(); ++st) {
        const Quadruple q = targets[state.schedule_pos];
        const StageReport rep = run_stage(state, q, cfg);
        json sj{{"Q", {q.A, q.B, q.C, q.D}}, {"ok", rep.ok}, {"m", rep.m}, {"m_trace", rep.m_trace}, {"message", rep.message}};
        sj["placements"] = json::array();
        for (const auto& p : rep.placements)
            sj["placements"].push_back({{"placed", p.placed}, {"n1", p.n1}, {"spread", p.spread}, {"message", p.message},
                                        {"q_hat", {p.q_hat.A, p.q_hat.B, p.q_hat.C, p.q_hat.D}}});
        sj["rho"] = json::array();
        for (const auto& r : rep.rho) sj["rho"].push_back({{"rho", r.rho}, {"achieved", r.achieved}, {"sups", r.sups}});
        stages.push_back(sj);
        std::cout << "stage " << st << " Q=(" << q.A << "," << q.B << "," << q.C << "," << q.D << ") " << rep.message << "\n";
        if (!rep.ok) {
            status = kGuard;
            break;
        }
        ++state.schedule_pos;
    }

    write_json(out_path(c, "spec.json"), spec_json(state.spec));
    json certs = json::array();
    for (const auto& ct : state.certificates) certs.push_back(ct.to_json());
    write_json(out_path(c, "certificates.json"), certs);
    write_json(out_path(c, "build_state.json"), state.to_json());
    write_json(out_path(c, "stages.json"), stages);

    const MapKernel k = MapKernel::build(state.spec, c.map);
    std::vector<double> grid;
    const double xmax = default_xmax(state.spec);
    for (int i = 0; i <= 100; ++i) grid.push_back(6.0 + (xmax - 6.0) * i / 100.0);
    std::ostringstream csv;
    csv << "r,s\n";
    for (const auto& g : measure_growth(k, grid)) csv << fmt(g.r) << "," << fmt(g.s) << "\n";
    write_text(out_path(c, "growth.csv"), csv.str());
    std::cout << "N = " << state.spec.size() << ", certificates = " << state.certificates.size() << "\n";
    return status;
}

int julia_cmd(const Config& c) {
    const WiggleSpec s = load_spec(c);
    auto k = make_kernel(c, s);
    const Address a = Address::parse(c.address);
    const Window w = Window::parse(c.window);
    std::vector<BoxCover> covers;
    json j = json::array();
    for (int d = 0; d <= c.depth; ++d) {
        covers.push_back(continuum_cover(*k, a, d));
        j.push_back(covers.back().to_json());
    }
    write_file(out_path(c, "julia.ppm").string(), render(covers, w));
    write_json(out_path(c, "cover.json"), {{"spec", spec_json(s)}, {"address", a.str()}, {"covers", j}});
    std::cout << "depth " << c.depth << " diam_max " << covers.back().diam_max << "\n";
    return kOk;
}

int verify_cmd(const Config& c) {
    const WiggleSpec s = load_spec(c);
    const VerificationReport rep = verify_all(s, c.map, c.verify);
    for (const auto& ch : rep.checks) std::cout << (ch.pass ? "PASS " : "FAIL ") << ch.name << " slack " << ch.slack << "\n";
    write_json(out_path(c, "verification_report.json"), rep.to_json());
    return rep.pass() ? kOk : kCheckFailed;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"tractlab: wiggled tracts, their projections, and crooked-cover builds"};
    app.require_subcommand(1);
    app.fallthrough();
    Config cfg;
    if (const char* env = std::getenv("TRACTLAB_OUT")) cfg.out_dir = env;
    std::string config_file;

    app.add_option("--out", cfg.out_dir, "output directory (default: $TRACTLAB_OUT or ./out)");
    app.add_option("--config", config_file, "JSON config file; flags override it");
    app.add_option("--spec", cfg.spec_text, "wiggles as r:R pairs, e.g. 20:30,50:70");
    app.add_option("--spec-file", cfg.spec_file, "JSON file with r and R arrays");
    app.add_option("--eps-target", cfg.map.eps_target, "kernel accuracy target");
    app.add_option("--resolution", cfg.map.table_step, "strip table spacing of the kernel");
    app.add_option("--xmax", cfg.xmax, "tract truncation abscissa");
    app.add_option("--seed", cfg.verify.seed, "sampling seed");
    app.add_option("--samples", cfg.verify.samples, "sample count for property checks");

    std::string action, quad = "", z_text, w_text;
    int n = 1;
    double lo = 4, hi = 1e4;
    int rows = 200;

    auto* tract = app.add_subcommand("tract", "tract geometry");
    tract->add_option("action", action, "build | plot | validate")->required()->check(CLI::IsMember({"build", "plot", "validate"}));
    tract->add_option("--window", cfg.window, "raster size as x0,x1,y0,y1,w,h (x/y are overridden)");

    auto* map = app.add_subcommand("map", "conformal kernel");
    map->add_option("action", action, "build | eval | selftest")->required()->check(CLI::IsMember({"build", "eval", "selftest"}));
    map->add_option("--z", z_text, "tract point x,y for F");
    map->add_option("--w", w_text, "half-plane point x,y for F^-1");

    auto* phi = app.add_subcommand("phi", "one-dimensional projection");
    phi->add_option("action", action, "sample | pieces")->required()->check(CLI::IsMember({"sample", "pieces"}));
    phi->add_option("--lo", lo, "smallest t");
    phi->add_option("--hi", hi, "largest t");
    phi->add_option("--rows", rows, "sample count");

    auto* un = app.add_subcommand("un", "minimal interval families");
    un->add_option("action", action, "enumerate")->required()->check(CLI::IsMember({"enumerate"}));
    un->add_option("--quad", quad, "A,B,C,D")->required();
    un->add_option("--n", n, "iterate");

    auto* crooked = app.add_subcommand("crooked", "crookedness of U_n(Q)");
    crooked->add_option("action", action, "check")->required()->check(CLI::IsMember({"check"}));
    crooked->add_option("--quad", quad, "A,B,C,D")->required();
    crooked->add_option("--n", n, "iterate");

    auto* build = app.add_subcommand("build", "wiggle builder");
    build->add_option("action", action, "run")->required()->check(CLI::IsMember({"run"}));
    build->add_option("--quad", quad, "first stage quadruple (default 9+K, 9+2K, 9+3K, 9+4K)");
    build->add_option("--K", cfg.build.K, "minimal quadruple size");
    build->add_option("--n-guard", cfg.build.n_guard, "lower-order guard n");
    build->add_option("--stages", cfg.build.stages, "number of stages");
    build->add_option("--tau", cfg.build.tau, "probe window");
    build->add_option("--eps", cfg.build.rho_eps, "probe tolerance (0 = chain step)");
    build->add_option("--cap", cfg.build.cap, "schedule cap on D");

    auto* julia = app.add_subcommand("julia", "Julia continuum covers");
    julia->add_option("action", action, "render")->required()->check(CLI::IsMember({"render"}));
    julia->add_option("--address", cfg.address, "prefix;tail, e.g. 1,-1;0");
    julia->add_option("--depth", cfg.depth, "pullback depth");
    julia->add_option("--window", cfg.window, "x0,x1,y0,y1[,w,h]");

    auto* verify = app.add_subcommand("verify", "property checks");
    verify->add_option("action", action, "all")->required()->check(CLI::IsMember({"all"}));
    verify->add_option("--depth", cfg.verify.cover_depth, "cover depth for the contraction check");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (!config_file.empty()) {
            // flags given on the command line win over the file
            const json j = read_json(config_file);
            if (j.contains("build") && build->count_all() == 0) cfg.build = BuildConfig::from_json(j["build"]);
            if (j.contains("map") && app.count("--eps-target") == 0) cfg.map.eps_target = j["map"].value("eps_target", cfg.map.eps_target);
            if (j.contains("map") && app.count("--resolution") == 0) cfg.map.table_step = j["map"].value("table_step", cfg.map.table_step);
            if (j.contains("spec") && cfg.spec_text.empty() && cfg.spec_file.empty()) cfg.spec_file = config_file;
            if (j.contains("verify")) {
                const auto& v = j["verify"];
                if (app.count("--samples") == 0) cfg.verify.samples = v.value("samples", cfg.verify.samples);
                if (app.count("--seed") == 0) cfg.verify.seed = v.value("seed", cfg.verify.seed);
                cfg.verify.tau = v.value("tau", cfg.verify.tau);
                cfg.verify.rho_eps = v.value("rho_eps", cfg.verify.rho_eps);
            }
        }
        if (cfg.build.K < 1) throw CLI::ValidationError("--K", "K must be >= 1");
        cfg.build.map = cfg.map;
        write_json(out_path(cfg, "config.json"), cfg.to_json(load_spec(cfg)));

        if (*tract) return tract_cmd(cfg, action);
        if (*map) return map_cmd(cfg, action, z_text, w_text);
        if (*phi) return phi_cmd(cfg, action, lo, hi, rows);
        if (*un) return un_cmd(cfg, parse_quad(quad), n);
        if (*crooked) return crooked_cmd(cfg, parse_quad(quad), n);
        if (*build) return build_cmd(cfg, quad);
        if (*julia) return julia_cmd(cfg);
        if (*verify) return verify_cmd(cfg);
    } catch (const CLI::ValidationError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kUsage;
    } catch (const IOError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return kIO;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return kIO;
    } catch (const ResolutionError& e) {
        std::cerr << "resolution error: " << e.what() << "\n";
        return kResolution;
    } catch (const TangencyError& e) {
        std::cerr << "tangency error: " << e.what() << "\n";
        return kTangency;
    } catch (const GuardError& e) {
        std::cerr << "guard error: " << e.what() << "\n";
        return kGuard;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    }
    return kUsage;
}
